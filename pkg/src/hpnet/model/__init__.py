from hpnet.model.index import (
    EDGE_FEATURE_DIM,
    ZERO_EDGE,
    SceneIndex,
    edge_feature_inputs,
)
from hpnet.model.network import (
    AttentionTrace,
    ForecastBundle,
    HPNet,
    inspect_hpa_weights,
)

__all__ = [
    "EDGE_FEATURE_DIM",
    "ZERO_EDGE",
    "AttentionTrace",
    "ForecastBundle",
    "HPNet",
    "SceneIndex",
    "edge_feature_inputs",
    "inspect_hpa_weights",
]
