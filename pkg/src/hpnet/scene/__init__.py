from hpnet.scene.geometry import (
    agent_local_features,
    lane_graph_edges,
    points_to_global,
    points_to_local,
    relative_edge,
    relative_edge_arrays,
    rotation,
    spatial_neighbors,
    temporal_window,
    transform_scene,
    wrap_angle,
)
from hpnet.scene.sceneio import (
    load_manifest,
    load_scene,
    manifest_scene_paths,
    save_manifest,
    save_scene,
    scene_from_text,
    scene_to_text,
)
from hpnet.scene.types import (
    AGENT_CLASSES,
    FRAME_DT,
    LANE_CLASSES,
    SAMPLE_RATE_HZ,
    AgentState,
    AgentTrack,
    EdgeFeature,
    IntegrityError,
    LaneSegment,
    Pose,
    Scene,
    SceneError,
    SceneFormatError,
    ValidityError,
)

__all__ = [
    "AGENT_CLASSES",
    "FRAME_DT",
    "LANE_CLASSES",
    "SAMPLE_RATE_HZ",
    "AgentState",
    "AgentTrack",
    "EdgeFeature",
    "IntegrityError",
    "LaneSegment",
    "Pose",
    "Scene",
    "SceneError",
    "SceneFormatError",
    "ValidityError",
    "agent_local_features",
    "lane_graph_edges",
    "load_manifest",
    "load_scene",
    "manifest_scene_paths",
    "points_to_global",
    "points_to_local",
    "relative_edge",
    "relative_edge_arrays",
    "rotation",
    "save_manifest",
    "save_scene",
    "scene_from_text",
    "scene_to_text",
    "spatial_neighbors",
    "temporal_window",
    "transform_scene",
    "wrap_angle",
]
