"""Per-scene attention index: canonical node ordering, padded neighbor/key
tables with masks, relative-pose edge features, loss targets and frame
conversion poses. Everything here is plain numpy computed once per scene;
the differentiable graph only gathers through these tables.

Canonical ordering: agents, lanes and mode slots are internally sorted by
content (full state lexicographic). Attention reductions then run in an
order independent of input labeling, which makes relabeling equivariance
exact, bit for bit; outputs are mapped back to input order afterwards.
"""

from __future__ import annotations

import numpy as np

from hpnet.scene.geometry import relative_edge_arrays, wrap_angle
from hpnet.scene.types import AGENT_CLASSES, LANE_CLASSES, SceneError, ValidityError


def edge_feature_inputs(d, direction, rel_heading, dt):
    """Encoder input layout for one edge: [d, cos/sin direction, cos/sin
    relative heading, dt]. Angles enter as cosine/sine pairs so the encoding
    stays continuous across the wrap boundary."""
    return np.stack(
        [d, np.cos(direction), np.sin(direction),
         np.cos(rel_heading), np.sin(rel_heading), dt],
        axis=-1,
    )


EDGE_FEATURE_DIM = 6
ZERO_EDGE = edge_feature_inputs(0.0, 0.0, 0.0, 0.0)


def _lexsort_rows(content):
    """Stable content-lexicographic order of rows."""
    keys = tuple(content[:, i] for i in reversed(range(content.shape[1])))
    return np.lexsort(keys)


def _pad_lists(lists, fill=0):
    width = max((len(l) for l in lists), default=0)
    width = max(width, 1)
    idx = np.full((len(lists), width), fill, dtype=np.int64)
    mask = np.zeros((len(lists), width), dtype=bool)
    for i, l in enumerate(lists):
        idx[i, : len(l)] = l
        mask[i, : len(l)] = True
    return idx, mask


class SceneIndex:
    def __init__(self, scene, cfg, full_future=True):
        if scene.history_frames != cfg.history_frames:
            raise SceneError(
                f"scene has T={scene.history_frames}, model expects {cfg.history_frames}"
            )
        if full_future and scene.future_frames != cfg.future_frames:
            raise SceneError(
                f"scene has F={scene.future_frames}, model expects {cfg.future_frames}"
            )
        self.cfg = cfg
        self.scene = scene
        T, F = cfg.history_frames, cfg.future_frames
        N, M = scene.num_agents, scene.num_lanes
        self.T, self.F, self.N, self.M = T, F, N, M
        if N == 0:
            raise SceneError("scene has no agents")

        xy, heading, vel, valid = scene.stacked()  # [N, T+F, ...]

        # ---- canonical agent order ------------------------------------
        classes = np.array([AGENT_CLASSES.index(a.agent_class) for a in scene.agents],
                           dtype=np.float64)
        content = np.concatenate(
            [classes[:, None], xy.reshape(N, -1), heading, vel.reshape(N, -1),
             valid.astype(np.float64)],
            axis=1,
        )
        self.agent_order = _lexsort_rows(content)          # canonical <- original
        self.agent_unorder = np.argsort(self.agent_order)  # original <- canonical

        xy = xy[self.agent_order]
        heading = heading[self.agent_order]
        vel = vel[self.agent_order]
        valid = valid[self.agent_order]
        classes = classes[self.agent_order].astype(int)

        # history grids, time-major [T, N, ...]
        self.pos = xy[:, :T].transpose(1, 0, 2)
        self.heading = heading[:, :T].T
        self.vel = vel[:, :T].transpose(1, 0, 2)
        self.valid = valid[:, :T].T
        if not valid[:, :T].any(axis=1).all():
            bad = int(np.flatnonzero(~valid[:, :T].any(axis=1))[0])
            raise ValidityError(
                f"agent {scene.agents[self.agent_order[bad]].track_id} has no valid history frame"
            )

        # ---- agent node features (location independent) ----------------
        speed = np.hypot(self.vel[..., 0], self.vel[..., 1])
        move_dir = np.where(
            speed == 0.0, 0.0,
            wrap_angle(np.arctan2(self.vel[..., 1], self.vel[..., 0]) - self.heading),
        )
        onehot = np.eye(len(AGENT_CLASSES))[classes]             # [N, C]
        onehot_t = np.broadcast_to(onehot, (T,) + onehot.shape)  # [T, N, C]
        self.agent_features = np.concatenate(
            [speed[..., None], np.cos(move_dir)[..., None], np.sin(move_dir)[..., None],
             onehot_t],
            axis=-1,
        ) * self.valid[..., None]
        self.agent_feature_dim = self.agent_features.shape[-1]

        # ---- canonical lane order + features ---------------------------
        lanes = scene.lanes
        if M:
            widths = max(len(l.centerline) for l in lanes)
            lane_content = np.full((M, 2 + 3 + 2 * widths), np.inf)
            for i, l in enumerate(lanes):
                pts = l.centerline
                lane_content[i, 0] = LANE_CLASSES.index(l.lane_class)
                lane_content[i, 1] = len(pts)
                lane_content[i, 2] = len(l.predecessors)
                lane_content[i, 3] = len(l.successors)
                lane_content[i, 4] = len(l.adjacent)
                lane_content[i, 5 : 5 + pts.size] = pts.reshape(-1)
            self.lane_order = _lexsort_rows(lane_content)
        else:
            self.lane_order = np.zeros(0, dtype=np.int64)
        lanes_c = [lanes[i] for i in self.lane_order]
        id_to_canon = {l.lane_id: i for i, l in enumerate(lanes_c)}

        mid = [l.midpoint_pose for l in lanes_c]
        self.lane_xy = np.array([[p.x, p.y] for p in mid]).reshape(M, 2)
        self.lane_heading = np.array([p.heading for p in mid]).reshape(M)
        lane_cls = np.array([LANE_CLASSES.index(l.lane_class) for l in lanes_c], dtype=int)
        lengths = np.array([l.length for l in lanes_c]).reshape(M)
        lane_onehot = np.zeros((M, len(LANE_CLASSES)))
        if M:
            lane_onehot[np.arange(M), lane_cls] = 1.0
        self.lane_features = np.concatenate([lengths[:, None], lane_onehot], axis=-1)
        self.lane_feature_dim = 1 + len(LANE_CLASSES)

        # ---- lane graph self-attention keys -----------------------------
        incoming = [[] for _ in range(M)]
        for i, l in enumerate(lanes_c):
            for rel in ("predecessors", "successors", "adjacent"):
                for other in getattr(l, rel):
                    incoming[i].append(id_to_canon[other])
        incoming = [sorted(set(nbrs)) for nbrs in incoming]
        self.lane_keys, self.lane_mask = _pad_lists(incoming)
        d, direc, rel, dt = relative_edge_arrays(
            self.lane_xy[self.lane_keys], self.lane_heading[self.lane_keys], 0.0,
            self.lane_xy[:, None], self.lane_heading[:, None], 0.0,
        )
        self.lane_edges = edge_feature_inputs(d, direc, rel, dt)

        # ---- spatial attention: lanes within R1 of each (t, n) ----------
        TN = T * N
        pos_flat = self.pos.reshape(TN, 2)
        head_flat = self.heading.reshape(TN)
        valid_flat = self.valid.reshape(TN)
        if M:
            dist = np.hypot(
                pos_flat[:, None, 0] - self.lane_xy[None, :, 0],
                pos_flat[:, None, 1] - self.lane_xy[None, :, 1],
            )
            within = (dist <= cfg.lane_radius) & valid_flat[:, None]
            rows = [np.flatnonzero(w) for w in within]
        else:
            rows = [np.array([], dtype=np.int64)] * TN
        self.spatial_keys, self.spatial_mask = _pad_lists(rows)
        d, direc, rel, dt = relative_edge_arrays(
            self.lane_xy[self.spatial_keys] if M else np.zeros(self.spatial_keys.shape + (2,)),
            self.lane_heading[self.spatial_keys] if M else np.zeros(self.spatial_keys.shape),
            0.0,
            pos_flat[:, None], head_flat[:, None], 0.0,
        )
        self.spatial_edges = edge_feature_inputs(d, direc, rel, dt)

        # ---- temporal attention: own frames in [t - I1, t] ---------------
        frames = np.arange(T)
        offsets = np.arange(cfg.history_span + 1)
        key_frames = frames[:, None] - offsets[None, ::-1]        # [T, S] ascending
        frame_ok = key_frames >= 0
        key_frames = np.clip(key_frames, 0, T - 1)
        self.temporal_frames = key_frames
        self.temporal_mask = (
            frame_ok[:, None, :]
            & self.valid[key_frames].transpose(0, 2, 1)
            & self.valid[:, :, None]
        )
        d, direc, rel, dt = relative_edge_arrays(
            self.pos[key_frames].transpose(0, 2, 1, 3),       # [T, N, S, 2]
            self.heading[key_frames].transpose(0, 2, 1),
            key_frames[:, None, :].astype(np.float64),
            self.pos[:, :, None], self.heading[:, :, None],
            frames[:, None, None].astype(np.float64),
        )
        self.temporal_edges = edge_feature_inputs(d, direc, rel, dt)

        # ---- agent attention: others within R2 at the same frame ---------
        dxy = self.pos[:, :, None, :] - self.pos[:, None, :, :]
        ddist = np.hypot(dxy[..., 0], dxy[..., 1])
        near = (
            (ddist <= cfg.agent_radius)
            & self.valid[:, None, :]
            & self.valid[:, :, None]
            & ~np.eye(N, dtype=bool)[None]
        )
        rows = [np.flatnonzero(near[t, n]) for t in range(T) for n in range(N)]
        keys, mask = _pad_lists(rows)
        self.agent_keys = keys.reshape(T, N, -1)
        self.agent_mask = mask.reshape(T, N, -1)
        src_pos = np.take_along_axis(
            self.pos[:, None], self.agent_keys[..., None].repeat(2, -1), axis=2
        )
        src_head = np.take_along_axis(self.heading[:, None], self.agent_keys, axis=2)
        d, direc, rel, dt = relative_edge_arrays(
            src_pos, src_head, 0.0,
            self.pos[:, :, None], self.heading[:, :, None], 0.0,
        )
        self.agent_edges = edge_feature_inputs(d, direc, rel, dt)

        # ---- historical prediction attention: own [t - I2, t] ------------
        offsets = np.arange(cfg.prediction_span + 1)
        hp_frames = frames[:, None] - offsets[None, ::-1]
        hp_ok = hp_frames >= 0
        hp_frames = np.clip(hp_frames, 0, T - 1)
        self.hpa_frames = hp_frames
        self.hpa_mask = (
            hp_ok[:, None, :]
            & self.valid[hp_frames].transpose(0, 2, 1)
            & self.valid[:, :, None]
        )
        d, direc, rel, dt = relative_edge_arrays(
            self.pos[hp_frames].transpose(0, 2, 1, 3),
            self.heading[hp_frames].transpose(0, 2, 1),
            hp_frames[:, None, :].astype(np.float64),
            self.pos[:, :, None], self.heading[:, :, None],
            frames[:, None, None].astype(np.float64),
        )
        self.hpa_edges = edge_feature_inputs(d, direc, rel, dt)

        # ---- loss targets: future in the (t, n) local frame ---------------
        if full_future:
            fut_xy = xy[:, T:].transpose(1, 0, 2)                  # [F, N, 2]
            fut_valid = valid[:, T:].T                            # [F, N]
            tgt_idx = frames[:, None] + np.arange(1, F + 1)[None]  # future frame per (t, f)
            whole = np.concatenate([self.pos, fut_xy], axis=0)     # [T+F, N, 2]
            whole_valid = np.concatenate([self.valid, fut_valid], axis=0)
            rel_xy = whole[tgt_idx].transpose(0, 2, 1, 3) - self.pos[:, :, None, :]
            cos_h, sin_h = np.cos(self.heading), np.sin(self.heading)
            self.targets_local = np.stack(
                [
                    cos_h[:, :, None] * rel_xy[..., 0] + sin_h[:, :, None] * rel_xy[..., 1],
                    -sin_h[:, :, None] * rel_xy[..., 0] + cos_h[:, :, None] * rel_xy[..., 1],
                ],
                axis=-1,
            )                                                     # [T, N, F, 2]
            self.target_mask = (
                self.valid & whole_valid[tgt_idx].all(axis=1)
            )                                                     # [T, N]

    # ---- output frame conversion ---------------------------------------
    def to_global(self, local):
        """Map [T, N(original), K, F, 2] local-frame points to global frame."""
        pos = self.pos[:, self.agent_unorder]        # original order
        head = self.heading[:, self.agent_unorder]
        cos_h, sin_h = np.cos(head), np.sin(head)
        x, y = local[..., 0], local[..., 1]
        gx = cos_h[:, :, None, None] * x - sin_h[:, :, None, None] * y
        gy = sin_h[:, :, None, None] * x + cos_h[:, :, None, None] * y
        return np.stack(
            [gx + pos[:, :, None, None, 0], gy + pos[:, :, None, None, 1]], axis=-1
        )

    def valid_original(self):
        return self.valid[:, self.agent_unorder]

    def targets_original(self):
        return (
            self.targets_local[:, self.agent_unorder],
            self.target_mask[:, self.agent_unorder],
        )
