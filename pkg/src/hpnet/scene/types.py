"""Scene data model: agent tracks over a shared 10 Hz time base plus a lane
graph. Frames are integers t in [-T+1, F]; t <= 0 is observed history and
t >= 1 is ground-truth future. Scenes are immutable after validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

AGENT_CLASSES = ("vehicle", "pedestrian", "cyclist")
LANE_CLASSES = ("normal", "connector", "boundary")
SAMPLE_RATE_HZ = 10.0
FRAME_DT = 1.0 / SAMPLE_RATE_HZ


class SceneError(ValueError):
    """Base class for scene-model violations."""


class ValidityError(SceneError):
    """An invalid (unobserved) agent state was used where a valid one is required."""


class IntegrityError(SceneError):
    """Lane-graph connectivity is inconsistent or references missing ids."""


class SceneFormatError(SceneError):
    """A scene file does not conform to the documented schema."""


class Pose(NamedTuple):
    x: float
    y: float
    heading: float


class AgentState(NamedTuple):
    x: float
    y: float
    heading: float
    vx: float
    vy: float
    agent_class: str
    valid: bool


class EdgeFeature(NamedTuple):
    """Relative spatio-temporal polar tuple between two graph nodes.

    distance >= 0; angles in (-pi, pi]; dt in frames (source minus target).
    """

    distance: float
    direction: float
    relative_heading: float
    dt: float


@dataclass
class AgentTrack:
    track_id: int
    agent_class: str
    xy: np.ndarray        # [T+F, 2]
    heading: np.ndarray   # [T+F]
    vel: np.ndarray       # [T+F, 2]
    valid: np.ndarray     # [T+F] bool

    def state(self, index):
        return AgentState(
            float(self.xy[index, 0]),
            float(self.xy[index, 1]),
            float(self.heading[index]),
            float(self.vel[index, 0]),
            float(self.vel[index, 1]),
            self.agent_class,
            bool(self.valid[index]),
        )

    def pose(self, index):
        return Pose(float(self.xy[index, 0]), float(self.xy[index, 1]), float(self.heading[index]))


@dataclass
class LaneSegment:
    lane_id: int
    lane_class: str
    centerline: np.ndarray  # [P, 2], P >= 2
    predecessors: list = field(default_factory=list)
    successors: list = field(default_factory=list)
    adjacent: list = field(default_factory=list)

    @property
    def length(self):
        deltas = np.diff(self.centerline, axis=0)
        return float(np.hypot(deltas[:, 0], deltas[:, 1]).sum())

    @property
    def midpoint_pose(self):
        pts = self.centerline
        deltas = np.diff(pts, axis=0)
        seg = np.hypot(deltas[:, 0], deltas[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        half = cum[-1] / 2.0
        i = int(np.searchsorted(cum, half, side="right") - 1)
        i = min(i, len(seg) - 1)
        frac = 0.0 if seg[i] == 0 else (half - cum[i]) / seg[i]
        point = pts[i] + frac * deltas[i]
        heading = float(np.arctan2(deltas[i, 1], deltas[i, 0]))
        return Pose(float(point[0]), float(point[1]), heading)


@dataclass
class Scene:
    history_frames: int
    future_frames: int
    agents: list            # list[AgentTrack]
    lanes: list             # list[LaneSegment]
    focal_agent: int = 0
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        self.validate()

    # frame <-> array index
    def frame_index(self, t):
        idx = t + self.history_frames - 1
        if not 0 <= idx < self.total_frames:
            raise SceneError(f"frame {t} outside [-T+1, F]")
        return idx

    @property
    def total_frames(self):
        return self.history_frames + self.future_frames

    @property
    def num_agents(self):
        return len(self.agents)

    @property
    def num_lanes(self):
        return len(self.lanes)

    def history_slice(self):
        return slice(0, self.history_frames)

    def future_slice(self):
        return slice(self.history_frames, self.total_frames)

    # stacked views used by the numeric pipeline
    def stacked(self):
        xy = np.stack([a.xy for a in self.agents])
        heading = np.stack([a.heading for a in self.agents])
        vel = np.stack([a.vel for a in self.agents])
        valid = np.stack([a.valid for a in self.agents])
        return xy, heading, vel, valid

    def lane_by_id(self):
        return {l.lane_id: l for l in self.lanes}

    def validate(self):
        if self.history_frames < 1 or self.future_frames < 1:
            raise SceneError("need at least one history and one future frame")
        n = self.total_frames
        for a in self.agents:
            a.xy = np.asarray(a.xy, dtype=np.float64).reshape(n, 2)
            a.heading = np.asarray(a.heading, dtype=np.float64).reshape(n)
            a.vel = np.asarray(a.vel, dtype=np.float64).reshape(n, 2)
            a.valid = np.asarray(a.valid, dtype=bool).reshape(n)
            if a.agent_class not in AGENT_CLASSES:
                raise SceneError(f"unknown agent class {a.agent_class!r}")
            obs = a.heading[a.valid]
            if obs.size and (np.any(obs <= -np.pi) or np.any(obs > np.pi)):
                raise SceneError(f"agent {a.track_id}: heading outside (-pi, pi]")
        ids = [l.lane_id for l in self.lanes]
        if len(set(ids)) != len(ids):
            raise IntegrityError("duplicate lane ids")
        table = {l.lane_id: l for l in self.lanes}
        for l in self.lanes:
            l.centerline = np.asarray(l.centerline, dtype=np.float64).reshape(-1, 2)
            if len(l.centerline) < 2:
                raise SceneError(f"lane {l.lane_id}: centerline needs >= 2 points")
            if l.lane_class not in LANE_CLASSES:
                raise SceneError(f"unknown lane class {l.lane_class!r}")
            for rel, back in (("successors", "predecessors"),
                              ("predecessors", "successors"),
                              ("adjacent", "adjacent")):
                for other in getattr(l, rel):
                    if other not in table:
                        raise IntegrityError(
                            f"lane {l.lane_id}: dangling {rel} id {other}"
                        )
                    if l.lane_id not in getattr(table[other], back):
                        raise IntegrityError(
                            f"lanes {l.lane_id}/{other}: {rel} not mirrored in {back}"
                        )
        if self.agents and not (0 <= self.focal_agent < len(self.agents)):
            raise SceneError(f"focal agent {self.focal_agent} out of range")

    def window(self, offset, history_frames, future_frames):
        """Re-rooted sub-scene covering array frames [offset, offset+T'+F').

        Used by the streaming rollout: offset shifts the t=0 split forward.
        """
        n = history_frames + future_frames
        if offset < 0 or offset + n > self.total_frames:
            raise SceneError(
                f"window [{offset}, {offset + n}) outside scene of {self.total_frames} frames"
            )
        agents = [
            AgentTrack(
                a.track_id,
                a.agent_class,
                a.xy[offset:offset + n].copy(),
                a.heading[offset:offset + n].copy(),
                a.vel[offset:offset + n].copy(),
                a.valid[offset:offset + n].copy(),
            )
            for a in self.agents
        ]
        return Scene(
            history_frames,
            future_frames,
            agents,
            self.lanes,
            focal_agent=self.focal_agent,
            sample_rate_hz=self.sample_rate_hz,
        )
