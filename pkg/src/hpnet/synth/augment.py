"""Training-time scene augmentations: horizontal flip, whole-track agent
occlusion, lane occlusion with connectivity repair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hpnet.scene.geometry import wrap_angle
from hpnet.scene.types import AgentTrack, LaneSegment, Scene, SceneError


@dataclass
class AugmentationConfig:
    flip_ratio: float = 0.5
    agent_occlusion_ratio: float = 0.05
    lane_occlusion_ratio: float = 0.2

    def validate(self):
        for name in ("flip_ratio", "agent_occlusion_ratio", "lane_occlusion_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SceneError(f"{name} must be in [0, 1], got {v}")


def flip_scene(scene):
    """Mirror the scene across the y-axis (x -> -x), consistently."""
    agents = [
        AgentTrack(
            a.track_id,
            a.agent_class,
            np.stack([-a.xy[:, 0], a.xy[:, 1]], axis=1),
            wrap_angle(np.pi - a.heading),
            np.stack([-a.vel[:, 0], a.vel[:, 1]], axis=1),
            a.valid.copy(),
        )
        for a in scene.agents
    ]
    lanes = [
        LaneSegment(
            l.lane_id,
            l.lane_class,
            np.stack([-l.centerline[:, 0], l.centerline[:, 1]], axis=1),
            list(l.predecessors),
            list(l.successors),
            list(l.adjacent),
        )
        for l in scene.lanes
    ]
    return Scene(
        scene.history_frames,
        scene.future_frames,
        agents,
        lanes,
        focal_agent=scene.focal_agent,
        sample_rate_hz=scene.sample_rate_hz,
    )


def _drop_lanes(lanes, keep_ids):
    kept = []
    for l in lanes:
        if l.lane_id not in keep_ids:
            continue
        kept.append(
            LaneSegment(
                l.lane_id,
                l.lane_class,
                l.centerline.copy(),
                [i for i in l.predecessors if i in keep_ids],
                [i for i in l.successors if i in keep_ids],
                [i for i in l.adjacent if i in keep_ids],
            )
        )
    return kept


def augment(scene, cfg, seed):
    """Apply the configured augmentations; deterministic in (scene, cfg, seed)."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    out = scene
    if rng.random() < cfg.flip_ratio:
        out = flip_scene(out)
    keep_agents = []
    for i, a in enumerate(out.agents):
        if i != out.focal_agent and rng.random() < cfg.agent_occlusion_ratio:
            continue
        keep_agents.append(a)
    focal_id = out.agents[out.focal_agent].track_id
    keep_lane_ids = {
        l.lane_id for l in out.lanes if rng.random() >= cfg.lane_occlusion_ratio
    }
    if keep_agents is not out.agents or len(keep_lane_ids) != len(out.lanes):
        agents = [
            AgentTrack(a.track_id, a.agent_class, a.xy.copy(), a.heading.copy(),
                       a.vel.copy(), a.valid.copy())
            for a in keep_agents
        ]
        focal = next(i for i, a in enumerate(agents) if a.track_id == focal_id)
        out = Scene(
            out.history_frames,
            out.future_frames,
            agents,
            _drop_lanes(out.lanes, keep_lane_ids),
            focal_agent=focal,
            sample_rate_hz=out.sample_rate_hz,
        )
    return out
