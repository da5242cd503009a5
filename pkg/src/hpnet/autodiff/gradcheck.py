"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

import numpy as np

from hpnet.autodiff.tensor import Tape


class GradCheckError(RuntimeError):
    """The function value was non-finite at the probe point."""


def grad_check(f, leaves, h=1e-5, samples=None, rng=None):
    """Max relative disagreement between tape and numeric gradients.

    ``f`` is a no-argument callable returning a scalar Tensor computed from
    the requires_grad ``leaves``. Every leaf component is probed unless
    ``samples`` limits the probe set to randomly chosen components. The
    per-component error is |analytic - numeric| / max(1, |numeric|) with a
    central difference of step ``h``.
    """
    with Tape() as tape:
        out = f()
    if not np.isfinite(out.data).all():
        raise GradCheckError("function value is not finite at the probe point")
    grads = tape.gradients(out)

    coords = [(i, j) for i, leaf in enumerate(leaves) for j in range(leaf.data.size)]
    if samples is not None and samples < len(coords):
        if rng is None:
            rng = np.random.default_rng(0)
        picks = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[int(p)] for p in picks]

    worst = 0.0
    for i, j in coords:
        leaf = leaves[i]
        flat = leaf.data.reshape(-1)
        saved = flat[j]
        flat[j] = saved + h
        up = float(f().data)
        flat[j] = saved - h
        down = float(f().data)
        flat[j] = saved
        if not (np.isfinite(up) and np.isfinite(down)):
            raise GradCheckError("perturbed function value is not finite")
        numeric = (up - down) / (2.0 * h)
        g = grads.get(leaf)
        analytic = 0.0 if g is None else float(g.reshape(-1)[j])
        err = abs(analytic - numeric) / max(1.0, abs(numeric))
        if err > worst:
            worst = err
    return worst
