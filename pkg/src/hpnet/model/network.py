"""The forecasting network.

Pipeline per scene (all shapes canonical-order internally):

    agent/lane encoders -> spatio-temporal cross attention (lanes within R1,
    own history within I1) -> repeated rounds of agent / historical-
    prediction / mode attention -> trajectory proposals; proposals are
    re-encoded as queries and the whole pipeline runs again to produce a
    refinement and per-mode probability scores.

Attention keys are always source-node embedding ++ relative-pose edge
embedding. The key/value projection of that concatenation is computed as
split projections (project sources once, project edge embeddings once,
gather, add), which is the same linear map without re-projecting gathered
or mode-tiled rows.

Outputs are decoded in the local frame of agent n at frame t and returned
at every history frame, restored to the caller's agent order and mode
slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hpnet.autodiff import nn
from hpnet.autodiff import tensor as T
from hpnet.autodiff.tensor import Tensor
from hpnet.model.index import ZERO_EDGE, EDGE_FEATURE_DIM, SceneIndex


class AttentionTrace:
    """Per-sublayer attention weights recorded during one forward pass."""

    def __init__(self, index):
        self.index = index
        self.mode_order = None
        self.records = {}   # (stage, sublayer, round) -> [T,N,K,H,S] ndarray

    def put(self, key, probs):
        self.records[key] = probs

    def hpa_row(self, t, n, k, stage=1, round_idx=None):
        """Head-averaged historical-prediction weights for one query.

        ``t`` is a frame in [-T+1, 0]; ``n``/``k`` are the caller's agent
        index and mode slot. Returns (frames, weights) over the unmasked
        window [t - I2, t]; weights sum to 1.
        """
        idx = self.index
        rounds = [r for (s, name, r) in self.records if s == stage and name == "hpa"]
        if not rounds:
            raise KeyError("trace does not contain historical-prediction records")
        r = max(rounds) if round_idx is None else round_idx
        probs = self.records[(stage, "hpa", r)]
        ti = t + idx.T - 1
        nc = int(idx.agent_unorder[n])
        kc = int(np.argsort(self.mode_order)[k])
        row = probs[ti, nc, kc].mean(axis=0)
        mask = idx.hpa_mask[ti, nc]
        frames = idx.hpa_frames[ti][mask] - (idx.T - 1)
        return frames, row[mask]


def inspect_hpa_weights(trace, t, n, k):
    """Weights over frames [t - I2, t]; raises if tracing was disabled."""
    if trace is None:
        raise ValueError("attention trace is disabled; run forward(trace=True)")
    return trace.hpa_row(t, n, k)


@dataclass
class ForecastBundle:
    """Model outputs in the caller's agent order and mode-slot order."""

    proposals: Tensor        # [T, N, K, F, 2] local frames
    refinement: Tensor       # [T, N, K, F, 2]
    finals: Tensor           # [T, N, K, F, 2], proposals + refinement
    score_logits: Tensor     # [T, N, K]
    probs: Tensor            # [T, N, K], rows sum to 1
    valid: np.ndarray        # [T, N] query validity
    index: SceneIndex
    trace: AttentionTrace | None = None


class _EdgeAttention:
    """Masked attention over gathered (source ++ edge) keys, split-projected."""

    def __init__(self, store, name, cfg):
        d = cfg.embed_dim
        self.cfg = cfg
        self.heads = cfg.num_heads
        self.d_head = d // cfg.num_heads
        self.edge_mlp = nn.TwoLayerMLP(store, f"{name}.edge", EDGE_FEATURE_DIM, d, d,
                                       cfg.activation)
        self.wq = nn.Linear(store, f"{name}.q", d, d)
        # source-side projections carry no bias: the edge-side bias covers
        # the summed key/value map exactly once
        self.wk_src = nn.Linear(store, f"{name}.ks", d, d, bias=False)
        self.wk_edge = nn.Linear(store, f"{name}.ke", d, d)
        self.wv_src = nn.Linear(store, f"{name}.vs", d, d, bias=False)
        self.wv_edge = nn.Linear(store, f"{name}.ve", d, d)
        self.wo = nn.Linear(store, f"{name}.o", d, d)

    def project_sources(self, rows):
        """K/V-project unique source rows once; gather afterwards."""
        return self.wk_src(rows), self.wv_src(rows)

    def project_edges(self, feats):
        emb = self.edge_mlp(T.constant(feats))
        return self.wk_edge(emb), self.wv_edge(emb)

    def attend(self, queries, keys, values, mask, trace=None):
        """queries [B,Q,D], keys/values [B,S,D]; zero mixture on empty rows."""
        b, nq, d = queries.shape
        s = keys.shape[1]
        q = T.reshape(self.wq(queries), (b, nq, self.heads, self.d_head))
        k = T.reshape(keys, (b, s, self.heads, self.d_head))
        v = T.reshape(values, (b, s, self.heads, self.d_head))
        mixed, probs = T.scaled_dot_attention(
            q, k, v, mask, 1.0 / np.sqrt(self.d_head), allow_empty=True
        )
        if trace is not None:
            trace.append(probs)
        return self.wo(T.reshape(mixed, (b, nq, d)))


def _tile_modes(x, lead, modes):
    """[*lead, S, D] -> [prod(lead)*modes, S, D] repeating along a new mode axis."""
    s, d = x.shape[-2], x.shape[-1]
    x = T.reshape(x, lead + (1, s, d))
    x = T.broadcast_to(x, lead + (modes, s, d))
    return T.reshape(x, (-1, s, d))


class _SelfAttentionBlock:
    """Pre-norm residual block: self-attention over rows of the prediction
    grid plus a feed-forward update."""

    def __init__(self, store, name, cfg):
        d = cfg.embed_dim
        self.cfg = cfg
        self.norm = nn.LayerNorm(store, f"{name}.ln", d)
        self.attn = _EdgeAttention(store, name, cfg)
        self.ffn_norm = nn.LayerNorm(store, f"{name}.fln", d)
        self.ffn = nn.TwoLayerMLP(store, f"{name}.ffn", d, d, d, cfg.activation)

    def __call__(self, p, key_rows, mask, edge_kv, batch_q, drop, trace=None):
        cfg = self.cfg
        d = cfg.embed_dim
        h = self.norm(p) if cfg.pre_norm else p
        h_rows = T.reshape(h, (-1, d))
        hk, hv = self.attn.project_sources(h_rows)
        keys = T.take_rows(hk, key_rows)
        values = T.take_rows(hv, key_rows)
        ek, ev = edge_kv
        if ek is not None:
            keys = keys + ek
            values = values + ev
        q = T.reshape(h, batch_q + (d,))
        out = drop(self.attn.attend(q, keys, values, mask, trace=trace))
        p = p + T.reshape(out, p.shape) if cfg.pre_norm else T.reshape(out, p.shape)
        f = self.ffn(self.ffn_norm(p)) if cfg.pre_norm else self.ffn(p)
        return p + drop(f) if cfg.pre_norm else drop(f)


class _StageLayers:
    """Parameters for one proposal/refinement pass."""

    def __init__(self, store, name, cfg):
        d = cfg.embed_dim
        self.cfg = cfg
        self.q_norm = nn.LayerNorm(store, f"{name}.st.qln", d)
        self.lane_norm = nn.LayerNorm(store, f"{name}.st.lln", d)
        self.agent_norm = nn.LayerNorm(store, f"{name}.st.aln", d)
        self.spatial = _EdgeAttention(store, f"{name}.st.spatial", cfg)
        self.temporal = _EdgeAttention(store, f"{name}.st.temporal", cfg)
        self.st_ffn_norm = nn.LayerNorm(store, f"{name}.st.fln", d)
        self.st_ffn = nn.TwoLayerMLP(store, f"{name}.st.ffn", d, d, d, cfg.activation)
        self.agent_blocks = [
            _SelfAttentionBlock(store, f"{name}.tfa{r}.agent", cfg)
            for r in range(cfg.attn_rounds)
        ]
        self.hpa_blocks = [
            _SelfAttentionBlock(store, f"{name}.tfa{r}.hpa", cfg)
            for r in range(cfg.attn_rounds)
        ] if cfg.use_hpa else []
        self.mode_blocks = [
            _SelfAttentionBlock(store, f"{name}.tfa{r}.mode", cfg)
            for r in range(cfg.attn_rounds)
        ]


class HPNet:
    """Two-stage multimodal forecaster over scene graphs."""

    def __init__(self, cfg, seed=0):
        cfg.validate()
        self.cfg = cfg
        self.store = nn.ParamStore(seed)
        d = cfg.embed_dim
        from hpnet.scene.types import AGENT_CLASSES, LANE_CLASSES

        self.agent_mlp = nn.TwoLayerMLP(self.store, "enc.agent",
                                        3 + len(AGENT_CLASSES), d, d, cfg.activation)
        self.lane_mlp = nn.TwoLayerMLP(self.store, "enc.lane",
                                       1 + len(LANE_CLASSES), d, d, cfg.activation)
        self.lane_block = _SelfAttentionBlock(self.store, "enc.lane_graph", cfg)
        self.mode_queries = self.store.normal("queries.mode", (cfg.num_modes, d), std=0.5)
        self.stages = [_StageLayers(self.store, f"s{i}", cfg) for i in range(2)]
        self.decode_norm = [nn.LayerNorm(self.store, f"s{i}.dec.ln", d) for i in range(2)]
        self.traj_mlp = [
            nn.TwoLayerMLP(self.store, f"s{i}.dec.traj", d, d,
                           2 * cfg.future_frames, cfg.activation)
            for i in range(2)
        ]
        self.score_norm = nn.LayerNorm(self.store, "s1.score.ln", d)
        self.score_mlp = nn.TwoLayerMLP(self.store, "s1.score", d, d, 1, cfg.activation)
        self.reencode_mlp = nn.TwoLayerMLP(self.store, "s1.reencode",
                                           2 * cfg.future_frames, d, d, cfg.activation)

    # ------------------------------------------------------------------
    def parameters(self):
        return self.store.tensors

    def index_scene(self, scene, full_future=True):
        return SceneIndex(scene, self.cfg, full_future=full_future)

    # ------------------------------------------------------------------
    def forward(self, scene_or_index, agent_features=None, train_mode=False,
                rng=None, trace=False):
        """Run the full two-stage pipeline on one scene.

        ``agent_features`` optionally overrides the location-independent
        input grid [T, N, feature] (caller's agent order) with a Tensor,
        which is how input-gradient probes reach the leaves. Deterministic
        whenever train_mode is False.
        """
        cfg = self.cfg
        idx = scene_or_index if isinstance(scene_or_index, SceneIndex) \
            else self.index_scene(scene_or_index)
        t_n, n_ag, k_m, d = idx.T, idx.N, cfg.num_modes, cfg.embed_dim

        if train_mode and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("train_mode with dropout needs an rng")
            def drop(x):
                return T.dropout(x, cfg.dropout, rng)
        else:
            def drop(x):
                return x

        if agent_features is None:
            feats = T.constant(idx.agent_features)
        else:
            feats = T.take(agent_features, idx.agent_order, axis=1)
        rec = AttentionTrace(idx) if trace else None

        e_agent = self.agent_mlp(feats)                     # [T, N, D]
        e_lane = self._encode_lanes(idx, drop)              # [M, D]

        # canonical mode-slot order (content sort makes slot relabeling exact)
        mode_order = np.lexsort(tuple(
            self.mode_queries.data[:, i] for i in reversed(range(d))
        ))
        mode_unorder = np.argsort(mode_order)
        if rec is not None:
            rec.mode_order = mode_order
        queries = T.take_rows(self.mode_queries, mode_order)
        queries = T.broadcast_to(
            T.reshape(queries, (1, 1, k_m, d)), (t_n, n_ag, k_m, d)
        )

        p1 = self._stage(0, idx, queries, e_agent, e_lane, drop, rec)
        l1 = self._decode_traj(0, p1)                       # [T,N,K,F,2] local

        anchors = T.reshape(l1, (t_n, n_ag, k_m, 2 * cfg.future_frames))
        queries2 = self.reencode_mlp(anchors)
        p2 = self._stage(1, idx, queries2, e_agent, e_lane, drop, rec)
        delta = self._decode_traj(1, p2)
        l2 = l1 + delta
        logits = T.reshape(self.score_mlp(self.score_norm(p2)), (t_n, n_ag, k_m))
        probs = T.softmax(logits, axis=-1)

        # back to the caller's agent order and mode slots
        def restore(x):
            return T.take(T.take(x, idx.agent_unorder, axis=1), mode_unorder, axis=2)

        return ForecastBundle(
            proposals=restore(l1),
            refinement=restore(delta),
            finals=restore(l2),
            score_logits=restore(logits),
            probs=restore(probs),
            valid=idx.valid_original(),
            index=idx,
            trace=rec,
        )

    __call__ = forward

    # ------------------------------------------------------------------
    def _encode_lanes(self, idx, drop):
        cfg = self.cfg
        e0 = self.lane_mlp(T.constant(idx.lane_features))
        if idx.M == 0:
            return e0
        blk = self.lane_block
        h = blk.norm(e0) if cfg.pre_norm else e0
        hk, hv = blk.attn.project_sources(h)
        keys = T.take_rows(hk, idx.lane_keys)
        values = T.take_rows(hv, idx.lane_keys)
        ek, ev = blk.attn.project_edges(idx.lane_edges)
        q = T.reshape(h, (idx.M, 1, cfg.embed_dim))
        out = drop(blk.attn.attend(q, keys + ek, values + ev, idx.lane_mask))
        out = T.reshape(out, e0.shape)
        e = e0 + out if cfg.pre_norm else out
        f = blk.ffn(blk.ffn_norm(e)) if cfg.pre_norm else blk.ffn(e)
        return e + drop(f) if cfg.pre_norm else drop(f)

    def _stage(self, s, idx, queries, e_agent, e_lane, drop, rec):
        cfg = self.cfg
        sp = self.stages[s]
        t_n, n_ag, k_m, d = idx.T, idx.N, cfg.num_modes, cfg.embed_dim
        tn = t_n * n_ag

        q = queries
        h = sp.q_norm(q) if cfg.pre_norm else q
        qb = T.reshape(h, (tn, k_m, d))

        parts = []
        if idx.M > 0:
            lane_h = sp.lane_norm(e_lane) if cfg.pre_norm else e_lane
            hk, hv = sp.spatial.project_sources(lane_h)
            ek, ev = sp.spatial.project_edges(idx.spatial_edges)
            keys = T.take_rows(hk, idx.spatial_keys) + ek
            values = T.take_rows(hv, idx.spatial_keys) + ev
            tr = [] if rec is not None else None
            a_sp = sp.spatial.attend(qb, keys, values, idx.spatial_mask, trace=tr)
            if rec is not None:
                rec.put((s, "spatial", 0),
                        tr[0].reshape(t_n, n_ag, k_m, cfg.num_heads, -1))
            parts.append(drop(a_sp))

        agent_h = sp.agent_norm(e_agent) if cfg.pre_norm else e_agent
        agent_rows = T.reshape(agent_h, (tn, d))
        hk, hv = sp.temporal.project_sources(agent_rows)
        key_rows = (idx.temporal_frames[:, None, :] * n_ag
                    + np.arange(n_ag)[None, :, None]).reshape(tn, -1)
        ek, ev = sp.temporal.project_edges(
            idx.temporal_edges.reshape(tn, -1, EDGE_FEATURE_DIM)
        )
        keys = T.take_rows(hk, key_rows) + ek
        values = T.take_rows(hv, key_rows) + ev
        tr = [] if rec is not None else None
        a_tm = sp.temporal.attend(qb, keys, values,
                                  idx.temporal_mask.reshape(tn, -1), trace=tr)
        if rec is not None:
            rec.put((s, "temporal", 0),
                    tr[0].reshape(t_n, n_ag, k_m, cfg.num_heads, -1))
        parts.append(drop(a_tm))

        mixed = parts[0]
        for g in parts[1:]:
            mixed = mixed + g
        p = q + T.reshape(mixed, q.shape) if cfg.pre_norm else T.reshape(mixed, q.shape)
        f = sp.st_ffn(sp.st_ffn_norm(p)) if cfg.pre_norm else sp.st_ffn(p)
        p = p + drop(f) if cfg.pre_norm else drop(f)

        for r in range(cfg.attn_rounds):
            p = self._agent_round(s, r, idx, p, drop, rec)
            if cfg.use_hpa:
                p = self._hpa_round(s, r, idx, p, drop, rec)
            p = self._mode_round(s, r, idx, p, drop, rec)
        return p

    def _agent_round(self, s, r, idx, p, drop, rec):
        cfg = self.cfg
        t_n, n_ag, k_m = idx.T, idx.N, cfg.num_modes
        s_a = idx.agent_keys.shape[-1]
        base = (np.arange(t_n)[:, None, None] * n_ag + idx.agent_keys) * k_m
        flat = base[:, :, None, :] + np.arange(k_m)[None, None, :, None]
        mask = np.broadcast_to(idx.agent_mask[:, :, None, :],
                               (t_n, n_ag, k_m, s_a)).reshape(-1, s_a)
        block = self.stages[s].agent_blocks[r]
        ek, ev = block.attn.project_edges(idx.agent_edges)
        edge_kv = (_tile_modes(ek, (t_n, n_ag), k_m), _tile_modes(ev, (t_n, n_ag), k_m))
        tr = [] if rec is not None else None
        out = block(p, flat.reshape(-1, s_a), mask, edge_kv,
                    (t_n * n_ag * k_m, 1), drop, trace=tr)
        if rec is not None:
            rec.put((s, "agent", r), tr[0].reshape(t_n, n_ag, k_m, cfg.num_heads, s_a))
        return out

    def _hpa_round(self, s, r, idx, p, drop, rec):
        cfg = self.cfg
        t_n, n_ag, k_m = idx.T, idx.N, cfg.num_modes
        s_h = idx.hpa_frames.shape[-1]
        base = (idx.hpa_frames[:, None, :] * n_ag
                + np.arange(n_ag)[None, :, None]) * k_m       # [T, N, S]
        flat = base[:, :, None, :] + np.arange(k_m)[None, None, :, None]
        mask = np.broadcast_to(idx.hpa_mask[:, :, None, :],
                               (t_n, n_ag, k_m, s_h)).reshape(-1, s_h)
        block = self.stages[s].hpa_blocks[r]
        ek, ev = block.attn.project_edges(idx.hpa_edges)
        edge_kv = (_tile_modes(ek, (t_n, n_ag), k_m), _tile_modes(ev, (t_n, n_ag), k_m))
        tr = [] if rec is not None else None
        out = block(p, flat.reshape(-1, s_h), mask, edge_kv,
                    (t_n * n_ag * k_m, 1), drop, trace=tr)
        if rec is not None:
            rec.put((s, "hpa", r), tr[0].reshape(t_n, n_ag, k_m, cfg.num_heads, s_h))
        return out

    def _mode_round(self, s, r, idx, p, drop, rec):
        cfg = self.cfg
        t_n, n_ag, k_m = idx.T, idx.N, cfg.num_modes
        tn = t_n * n_ag
        rows = np.arange(tn * k_m, dtype=np.int64).reshape(tn, k_m)
        mask = np.ones((tn, k_m), dtype=bool)
        block = self.stages[s].mode_blocks[r]
        ek, ev = block.attn.project_edges(ZERO_EDGE.reshape(1, 1, -1))
        edge_kv = (
            T.broadcast_to(ek, (tn, k_m, cfg.embed_dim)),
            T.broadcast_to(ev, (tn, k_m, cfg.embed_dim)),
        )
        tr = [] if rec is not None else None
        out = block(p, rows, mask, edge_kv, (tn, k_m), drop, trace=tr)
        if rec is not None:
            rec.put((s, "mode", r), tr[0].reshape(t_n, n_ag, k_m, cfg.num_heads, k_m))
        return out

    def _decode_traj(self, s, p):
        # decode per-frame displacements and accumulate: positions tens of
        # meters out stay reachable from small-magnitude head weights
        cfg = self.cfg
        h = self.decode_norm[s](p) if cfg.pre_norm else p
        flat = self.traj_mlp[s](h)
        t_n, n_ag, k_m = p.shape[0], p.shape[1], p.shape[2]
        steps = T.reshape(flat, (t_n, n_ag, k_m, cfg.future_frames, 2))
        return T.cumsum(steps, axis=3)
