from hpnet.synth.augment import AugmentationConfig, augment, flip_scene
from hpnet.synth.baseline import constant_velocity_rollout
from hpnet.synth.generate import (
    DEFAULT_MANEUVER_MIX,
    MAX_ACCEL,
    ScenarioSpec,
    generate,
    scene_seeds,
)
from hpnet.synth.maps import BUILDERS, LAYOUTS, MapLayout, RoutePath

__all__ = [
    "BUILDERS",
    "DEFAULT_MANEUVER_MIX",
    "LAYOUTS",
    "MAX_ACCEL",
    "AugmentationConfig",
    "MapLayout",
    "RoutePath",
    "ScenarioSpec",
    "augment",
    "constant_velocity_rollout",
    "flip_scene",
    "generate",
    "scene_seeds",
]
