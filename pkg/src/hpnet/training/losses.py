"""Winner-takes-all training objective.

Mode selection is by minimum endpoint displacement of the proposal stage
(per agent for the marginal objective, summed over agents for the joint
one) and is a stop-gradient index: regression losses only back-propagate
through the selected mode, classification through all score logits. Both
regressions (proposals and finals) plus the score cross-entropy are
averaged over valid queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hpnet.autodiff import tensor as T
from hpnet.autodiff.tensor import Tensor


class EmptyBatchError(ValueError):
    """No (frame, agent) query had a usable ground-truth future."""


@dataclass
class LossBreakdown:
    reg1: float
    reg2: float
    cls: float
    total: float
    selected: np.ndarray      # [T, N] marginal;  [T] joint
    total_tensor: Tensor      # differentiable total


def select_mode_marginal(endpoints, gt_endpoints):
    """argmin_k ||endpoint_k - gt endpoint||; ties take the smallest k.

    endpoints [..., K, 2], gt_endpoints [..., 2] -> [...] int.
    """
    d = np.linalg.norm(endpoints - gt_endpoints[..., None, :], axis=-1)
    return np.argmin(d, axis=-1)


def select_mode_joint(endpoints, gt_endpoints, include):
    """argmin_k of the displacement summed over included agents.

    endpoints [T, N, K, 2], gt_endpoints [T, N, 2], include [T, N] -> [T] int.
    """
    d = np.linalg.norm(endpoints - gt_endpoints[:, :, None, :], axis=-1)
    d = np.where(include[:, :, None], d, 0.0)
    return np.argmin(d.sum(axis=1), axis=-1)


def huber(pred, gt, delta=1.0):
    """Mean component-wise piecewise-quadratic loss between two [F, 2] arrays."""
    return T.tmean(T.huber(T.as_tensor(pred), np.asarray(gt, dtype=np.float64), delta))


def classification_loss(logits, target):
    """Stable cross-entropy of one row of mode logits against index ``target``."""
    lsm = T.log_softmax(T.as_tensor(logits), axis=-1)
    return T.neg(lsm[int(target)])


def _gather_mode_rows(traj, flat_modes):
    """traj [T,N,K,F,2] -> selected rows [T*N, F*2] for flat mode indices."""
    t_n, n_ag, k_m = traj.shape[0], traj.shape[1], traj.shape[2]
    rows = T.reshape(traj, (t_n * n_ag * k_m, -1))
    base = np.arange(t_n * n_ag, dtype=np.int64) * k_m
    return T.take_rows(rows, base + flat_modes)


def total_loss(bundle, objective="marginal", huber_delta=1.0):
    """LossBreakdown over every valid (frame, agent) query of one scene."""
    if objective not in ("marginal", "joint"):
        raise ValueError(f"unknown objective {objective!r}")
    idx = bundle.index
    targets, include = idx.targets_original()      # [T,N,F,2], [T,N]
    t_n, n_ag = include.shape
    k_m = bundle.probs.shape[-1]
    if not include.any():
        raise EmptyBatchError("no query has a complete ground-truth future")

    l1 = bundle.proposals
    ends = l1.data[:, :, :, -1, :]
    gt_ends = targets[:, :, -1, :]
    tgt_rows = targets.reshape(t_n * n_ag, -1)

    if objective == "marginal":
        kstar = select_mode_marginal(ends, gt_ends)            # [T, N]
        flat_modes = kstar.reshape(-1)
        weights = include.reshape(-1).astype(np.float64)
        weights /= weights.sum()

        r1 = T.huber(_gather_mode_rows(l1, flat_modes), tgt_rows, huber_delta)
        r2 = T.huber(_gather_mode_rows(bundle.finals, flat_modes), tgt_rows, huber_delta)
        reg1 = T.tsum(T.tmean(r1, axis=-1) * weights)
        reg2 = T.tsum(T.tmean(r2, axis=-1) * weights)

        lsm = T.log_softmax(T.reshape(bundle.score_logits, (t_n * n_ag, k_m)), axis=-1)
        picked = T.take_rows(
            T.reshape(lsm, (t_n * n_ag * k_m, 1)),
            np.arange(t_n * n_ag, dtype=np.int64) * k_m + flat_modes,
        )
        cls = T.neg(T.tsum(T.reshape(picked, (-1,)) * weights))
        selected = kstar
    else:
        kstar = select_mode_joint(ends, gt_ends, include)       # [T]
        flat_modes = np.repeat(kstar, n_ag)
        t_mask = include.any(axis=1)
        agent_w = include.reshape(-1).astype(np.float64)        # sum over agents
        t_w = t_mask.astype(np.float64)
        t_w /= t_w.sum()
        per_t = np.repeat(t_w, n_ag)

        r1 = T.huber(_gather_mode_rows(l1, flat_modes), tgt_rows, huber_delta)
        r2 = T.huber(_gather_mode_rows(bundle.finals, flat_modes), tgt_rows, huber_delta)
        reg1 = T.tsum(T.tmean(r1, axis=-1) * (agent_w * per_t))
        reg2 = T.tsum(T.tmean(r2, axis=-1) * (agent_w * per_t))

        counts = np.maximum(include.sum(axis=1), 1)[:, None, None]
        joint_logits = T.tsum(
            bundle.score_logits * (include[:, :, None] / counts), axis=1
        )                                                      # [T, K]
        lsm = T.log_softmax(joint_logits, axis=-1)
        picked = T.take_rows(
            T.reshape(lsm, (t_n * k_m, 1)),
            np.arange(t_n, dtype=np.int64) * k_m + kstar,
        )
        cls = T.neg(T.tsum(T.reshape(picked, (-1,)) * t_w))
        selected = kstar

    total = reg1 + reg2 + cls
    return LossBreakdown(
        reg1=float(reg1.data),
        reg2=float(reg2.data),
        cls=float(cls.data),
        total=float(total.data),
        selected=selected,
        total_tensor=total,
    )
