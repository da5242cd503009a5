"""Adaptive-moment optimizer with decoupled weight decay and a cosine
learning-rate schedule that anneals to zero."""

from __future__ import annotations

import math

import numpy as np


class TrainingError(RuntimeError):
    """Optimization aborted (non-finite gradients, bad state)."""


class CosineSchedule:
    """lr(step) = base * 0.5 * (1 + cos(pi * step / total)); lr(total) == 0."""

    def __init__(self, base_lr, total_steps):
        if total_steps <= 0:
            raise ValueError("total_steps must be positive")
        self.base_lr = base_lr
        self.total_steps = total_steps

    def lr(self, step):
        frac = min(max(step, 0), self.total_steps) / self.total_steps
        return self.base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))


class AdamW:
    """First/second-moment updates with bias correction; weight decay is
    applied directly to parameters, scaled by the current learning rate."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = params                     # dict name -> Tensor
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.exp_avg = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.exp_avg_sq = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self, grads, lr):
        """One update from a name -> gradient mapping; missing names get 0."""
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.isfinite(g).all():
                raise TrainingError(
                    f"non-finite gradient for parameter {name!r} at step "
                    f"{self.step_count} (|g|max={np.abs(g[np.isfinite(g)]).max(initial=0.0):.3e})"
                )
            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data = p.data - lr * update

    # checkpoint plumbing -------------------------------------------------
    def state_arrays(self):
        out = {}
        for name in self.params:
            out[f"opt.m.{name}"] = self.exp_avg[name]
            out[f"opt.v.{name}"] = self.exp_avg_sq[name]
        return out

    def load_state_arrays(self, arrays, step_count):
        for name in self.params:
            self.exp_avg[name] = np.array(arrays[f"opt.m.{name}"])
            self.exp_avg_sq[name] = np.array(arrays[f"opt.v.{name}"])
        self.step_count = int(step_count)
