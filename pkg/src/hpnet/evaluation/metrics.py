"""Displacement metrics over multimodal forecasts.

All trajectories are [K, F, 2] (or [N, K, F, 2] for the joint variants) in
one shared metric frame; ground truth is [F, 2] / [N, F, 2]. Every metric
is invariant under a rigid transform applied to predictions and ground
truth together.
"""

from __future__ import annotations

import numpy as np

MISS_THRESHOLD = 2.0  # meters; a miss is strictly farther than this


def _check(preds, gt):
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if preds.ndim != 3 or preds.shape[1:] != gt.shape:
        raise ValueError(f"shape mismatch: preds {preds.shape} vs gt {gt.shape}")
    return preds, gt


def min_ade(preds, gt):
    """Smallest per-mode average pointwise displacement."""
    preds, gt = _check(preds, gt)
    d = np.linalg.norm(preds - gt[None], axis=-1).mean(axis=-1)
    return float(d.min())


def min_fde(preds, gt):
    """Smallest endpoint displacement and its mode (ties: smallest index)."""
    preds, gt = _check(preds, gt)
    d = np.linalg.norm(preds[:, -1] - gt[-1], axis=-1)
    k = int(np.argmin(d))
    return float(d[k]), k


def miss_rate(min_fdes, threshold=MISS_THRESHOLD):
    """Fraction of samples whose best endpoint strays strictly beyond the
    threshold (an endpoint exactly at the threshold is a hit)."""
    values = np.asarray(list(min_fdes), dtype=np.float64)
    if values.size == 0:
        raise ValueError("miss_rate needs at least one sample")
    return float((values > threshold).mean())


def b_min_fde(preds, probs, gt):
    """minFDE plus the squared confidence shortfall of the best-endpoint mode."""
    probs = np.asarray(probs, dtype=np.float64)
    fde, k = min_fde(preds, gt)
    return fde + (1.0 - probs[k]) ** 2


def min_joint_ade(preds, gts):
    """Best shared-mode average displacement across all agents jointly."""
    preds = np.asarray(preds, dtype=np.float64)   # [N, K, F, 2]
    gts = np.asarray(gts, dtype=np.float64)       # [N, F, 2]
    if preds.ndim != 4 or preds.shape[0] != gts.shape[0] or preds.shape[2:] != gts.shape[1:]:
        raise ValueError(f"shape mismatch: preds {preds.shape} vs gts {gts.shape}")
    d = np.linalg.norm(preds - gts[:, None], axis=-1)   # [N, K, F]
    return float(d.mean(axis=(0, 2)).min())


def min_joint_fde(preds, gts):
    """Best shared-mode mean endpoint displacement across all agents."""
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.ndim != 4 or preds.shape[0] != gts.shape[0] or preds.shape[2:] != gts.shape[1:]:
        raise ValueError(f"shape mismatch: preds {preds.shape} vs gts {gts.shape}")
    d = np.linalg.norm(preds[:, :, -1] - gts[:, None, -1], axis=-1)   # [N, K]
    return float(d.mean(axis=0).min())
