"""Frame-relative geometry: local agent features, polar edge features,
neighborhood queries and causal time windows.

All angles are wrapped to (-pi, pi]. Zero-length vectors take direction 0
by convention so every feature is well defined.
"""

from __future__ import annotations

import numpy as np

from hpnet.scene.types import EdgeFeature, IntegrityError, ValidityError


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    out = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    out = np.where(out == -np.pi, np.pi, out)
    return float(out) if out.ndim == 0 else out


def agent_local_features(state):
    """Heading-frame motion features (speed, velocity direction, class)."""
    if not state.valid:
        raise ValidityError("agent state is not observed")
    v = float(np.hypot(state.vx, state.vy))
    if v == 0.0:
        phi = 0.0
    else:
        phi = wrap_angle(np.arctan2(state.vy, state.vx) - state.heading)
    return v, phi, state.agent_class


def relative_edge(src_pose, src_t, tgt_pose, tgt_t):
    """Polar edge tuple of the source node seen from the target node's frame."""
    dx = src_pose.x - tgt_pose.x
    dy = src_pose.y - tgt_pose.y
    d = float(np.hypot(dx, dy))
    if d == 0.0:
        direction = 0.0
    else:
        direction = wrap_angle(np.arctan2(dy, dx) - tgt_pose.heading)
    rel_heading = wrap_angle(src_pose.heading - tgt_pose.heading)
    return EdgeFeature(d, float(direction), float(rel_heading), float(src_t - tgt_t))


def relative_edge_arrays(src_xy, src_heading, src_t, tgt_xy, tgt_heading, tgt_t):
    """Vectorized relative_edge over broadcastable pose arrays.

    Returns (d, direction, rel_heading, dt) arrays in the broadcast shape.
    """
    dx = src_xy[..., 0] - tgt_xy[..., 0]
    dy = src_xy[..., 1] - tgt_xy[..., 1]
    d = np.hypot(dx, dy)
    direction = np.where(d == 0.0, 0.0, wrap_angle(np.arctan2(dy, dx) - tgt_heading))
    rel_heading = wrap_angle(src_heading - tgt_heading)
    dt = np.broadcast_to(np.asarray(src_t, dtype=np.float64)
                         - np.asarray(tgt_t, dtype=np.float64), d.shape)
    return d, direction, rel_heading, dt


def spatial_neighbors(center_xy, candidates_xy, radius, exclude=None):
    """Indices of candidates within ``radius`` (boundary inclusive).

    ``exclude`` optionally drops one index (the center itself, for
    self-attention key sets).
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    candidates_xy = np.asarray(candidates_xy, dtype=np.float64).reshape(-1, 2)
    d = np.hypot(candidates_xy[:, 0] - center_xy[0], candidates_xy[:, 1] - center_xy[1])
    keep = d <= radius
    if exclude is not None:
        keep[exclude] = False
    return np.flatnonzero(keep)


def temporal_window(t, span, history_frames):
    """Causal frame range [max(t - span, -T+1), t]."""
    if span < 0:
        raise ValueError(f"span must be >= 0, got {span}")
    lo = max(t - span, -history_frames + 1)
    return np.arange(lo, t + 1)


def lane_graph_edges(lanes):
    """Directed (source_id, target_id, relation) triples with edge features.

    One edge per declared relation, oriented source -> target so that each
    lane's incoming edges cover its predecessors, successors and adjacent
    lanes. Edge features use midpoint poses with dt = 0.
    """
    table = {l.lane_id: l for l in lanes}
    poses = {l.lane_id: l.midpoint_pose for l in lanes}
    edges = []
    for lane in lanes:
        for rel in ("predecessors", "successors", "adjacent"):
            for other in getattr(lane, rel):
                if other not in table:
                    raise IntegrityError(f"lane {lane.lane_id}: dangling {rel} id {other}")
                feat = relative_edge(poses[other], 0, poses[lane.lane_id], 0)
                edges.append((other, lane.lane_id, rel, feat))
    return edges


# ---------------------------------------------------------------------------
# rigid-frame conversions


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def points_to_local(points, pose):
    """Express global points in a pose's frame (origin at pose, x along heading)."""
    pts = np.asarray(points, dtype=np.float64)
    shifted = pts - np.array([pose.x, pose.y])
    return shifted @ rotation(pose.heading)  # R(-theta) applied on the right


def points_to_global(points, pose):
    pts = np.asarray(points, dtype=np.float64)
    return pts @ rotation(pose.heading).T + np.array([pose.x, pose.y])


def transform_scene(scene, angle, translation):
    """Apply one global rotation+translation to every agent and lane."""
    from hpnet.scene.types import AgentTrack, LaneSegment, Scene

    rot = rotation(angle)
    shift = np.asarray(translation, dtype=np.float64)
    agents = [
        AgentTrack(
            a.track_id,
            a.agent_class,
            a.xy @ rot.T + shift,
            wrap_angle(a.heading + angle),
            a.vel @ rot.T,
            a.valid.copy(),
        )
        for a in scene.agents
    ]
    lanes = [
        LaneSegment(
            l.lane_id,
            l.lane_class,
            l.centerline @ rot.T + shift,
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
