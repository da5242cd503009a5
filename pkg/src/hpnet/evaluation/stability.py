"""Temporal-consistency measurement between consecutive forecasts.

Forecasts made one frame apart share F-1 calendar frames: the earlier
forecast's points 1..F-1 and the later one's points 0..F-2. Mode slots are
matched by minimum overlap-segment average displacement (optimal bijective
assignment) and the metric is the sum of the matched pairs' overlap ADE.
"""

from __future__ import annotations

import numpy as np

from hpnet.evaluation.assignment import min_cost_assignment


def overlap_cost_matrix(prev, curr):
    """Pairwise overlap ADE between prev modes [K,F,2] and curr modes [K,F,2]."""
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if prev.shape != curr.shape or prev.ndim != 3:
        raise ValueError(f"bundle shapes disagree: {prev.shape} vs {curr.shape}")
    if prev.shape[1] < 2:
        raise ValueError("stability needs a horizon of at least 2 frames")
    a = prev[:, 1:]        # [K, F-1, 2] frames t+1 .. t+F-1
    b = curr[:, :-1]       # same calendar frames from the later forecast
    return np.linalg.norm(a[:, None] - b[None], axis=-1).mean(axis=-1)


def stability_summed_ade(prev, curr):
    """Summed matched-pair overlap ADE; 0 for perfectly consistent forecasts."""
    cost = overlap_cost_matrix(prev, curr)
    return min_cost_assignment(cost).total_cost
