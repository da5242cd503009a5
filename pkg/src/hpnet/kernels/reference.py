"""Numpy reference implementation of the hot attention kernels.

This module defines the semantics; the compiled twin in ``_core.pyx`` must
agree with it to within accumulation-order rounding (see the parity tests).

Shape conventions, shared by both backends:

    q     [B, Q, H, Dh]   queries; Q query slots share one key set
    k, v  [B, S, H, Dh]   padded key/value rows
    mask  [B, S]          True where a key row is real
    out   [B, Q, H, Dh]
    probs [B, Q, H, S]    attention weights, zero on masked columns
"""

import numpy as np

BACKEND = "numpy"


class EmptyKeyRowError(ValueError):
    """A query row had every key masked and allow_empty was not set."""


def sdpa_forward(q, k, v, mask, scale, allow_empty=False):
    """Masked scaled-dot-product attention over padded key sets.

    Rows whose mask is all-False produce zero probs and zero output when
    ``allow_empty`` is set, and raise :class:`EmptyKeyRowError` otherwise.
    """
    scores = np.einsum("bqhd,bshd->bqhs", q, k, optimize=True) * scale
    valid = mask[:, None, None, :]
    row_has_key = mask.any(axis=1)
    if not allow_empty and not row_has_key.all():
        bad = int(np.flatnonzero(~row_has_key)[0])
        raise EmptyKeyRowError(f"all keys masked for query row {bad}")
    shifted = np.where(valid, scores, -np.inf)
    top = shifted.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    expd = np.where(valid, np.exp(shifted - top), 0.0)
    denom = expd.sum(axis=-1, keepdims=True)
    safe = np.where(denom > 0.0, denom, 1.0)
    probs = expd / safe
    out = np.einsum("bqhs,bshd->bqhd", probs, v, optimize=True)
    return out, probs


def sdpa_backward(g_out, probs, q, k, v, scale):
    """Gradients of sdpa_forward wrt q, k, v.

    Masked columns carry zero probs, so their k/v gradients vanish without
    needing the mask again.
    """
    g_v = np.einsum("bqhs,bqhd->bshd", probs, g_out, optimize=True)
    g_p = np.einsum("bqhd,bshd->bqhs", g_out, v, optimize=True)
    inner = (g_p * probs).sum(axis=-1, keepdims=True)
    g_s = probs * (g_p - inner)
    g_q = np.einsum("bqhs,bshd->bqhd", g_s, k, optimize=True) * scale
    g_k = np.einsum("bqhs,bqhd->bshd", g_s, q, optimize=True) * scale
    return g_q, g_k, g_v


def scatter_add_rows(grad, idx, num_rows):
    """Sum rows of ``grad`` [E, D] into a fresh [num_rows, D] buffer at ``idx``."""
    out = np.zeros((num_rows, grad.shape[1]), dtype=grad.dtype)
    np.add.at(out, idx, grad)
    return out
