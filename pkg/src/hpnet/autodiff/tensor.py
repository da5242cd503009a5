"""Dense float64 tensors with tape-based reverse-mode differentiation.

Everything the forecasting model and its losses need is expressed through
the ops in this module. Ops record onto the active :class:`Tape` (if any);
``tape.gradients(loss)`` replays the record backwards and returns one
gradient per requires_grad leaf. Without an active tape ops run untracked,
which is how inference avoids graph bookkeeping.
"""

from __future__ import annotations

import threading

import numpy as np

from hpnet import kernels


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class MaskingError(ValueError):
    """A softmax/attention row had no unmasked entries."""


_state = threading.local()


def _active_tape():
    stack = getattr(_state, "tapes", None)
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "requires_grad", "node")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)


class _Node:
    __slots__ = ("out", "parents", "vjp", "tape")

    def __init__(self, out, parents, vjp, tape):
        self.out = out
        self.parents = parents
        self.vjp = vjp
        self.tape = tape


class GradientMap:
    """Read-only view of the gradients produced by one backward pass."""

    def __init__(self, grads):
        self._grads = grads

    def __getitem__(self, t):
        return self._grads[id(t)]

    def get(self, t, default=None):
        return self._grads.get(id(t), default)

    def __contains__(self, t):
        return id(t) in self._grads


class Tape:
    """Ordered record of executed ops, replayed backwards for gradients."""

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        stack = getattr(_state, "tapes", None)
        if stack is None:
            stack = _state.tapes = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _state.tapes.pop()
        return False

    def __len__(self):
        return len(self._nodes)

    def gradients(self, output, wrt=None):
        """Accumulate d(output)/d(leaf) for every requires_grad leaf.

        ``wrt`` may list extra (intermediate) tensors whose gradients should
        be kept. Repeated calls over the same tape are bitwise identical:
        the walk is a pure function of the record.
        """
        if output.data.size != 1:
            raise ShapeError(f"gradients need a scalar output, got {output.shape}")
        keep = {id(t) for t in wrt} if wrt else set()
        grads = {id(output): np.ones_like(output.data)}
        results = {}
        if output.requires_grad or id(output) in keep:
            results[id(output)] = grads[id(output)]
        for node in reversed(self._nodes):
            g_out = grads.pop(id(node.out), None)
            if g_out is None:
                continue
            parent_grads = node.vjp(g_out)
            for parent, g in zip(node.parents, parent_grads):
                if g is None:
                    continue
                pid = id(parent)
                if pid in grads:
                    grads[pid] = grads[pid] + g
                else:
                    grads[pid] = g
                if parent.requires_grad or pid in keep:
                    results[pid] = grads[pid]
        return GradientMap(results)


def _tracked(t, tape):
    return t.requires_grad or (t.node is not None and t.node.tape is tape)


def _make(data, parents, vjp):
    out = Tensor(data)
    tape = _active_tape()
    if tape is not None and any(_tracked(p, tape) for p in parents):
        node = _Node(out, parents, vjp, tape)
        out.node = node
        tape._nodes.append(node)
    return out


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x):
    return Tensor(np.asarray(x, dtype=np.float64))


def stop_gradient(x):
    """Detach: same values, no history."""
    return Tensor(x.data.copy())


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if squeeze:
        g = g.sum(axis=squeeze, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def neg(a):
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def _stable_sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = as_tensor(a)
    out = _stable_sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a):
    """x * sigmoid(x): the project-wide smooth rectifier."""
    a = as_tensor(a)
    sig = _stable_sigmoid(a.data)
    out = a.data * sig
    return _make(out, (a,), lambda g: (g * (sig + out * (1.0 - sig)),))


# ---------------------------------------------------------------------------
# linear algebra and structure


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got {a.shape} x {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(a.data @ b.data, (a, b), vjp)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, a.data.shape).copy(),)

    return _make(out, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.data.shape[i] for i in axis]))
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    return _make(
        a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),)
    )


def transpose(a, axes):
    a = as_tensor(a)
    inv = np.argsort(axes)
    return _make(
        np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),)
    )


def broadcast_to(a, shape):
    a = as_tensor(a)
    return _make(
        np.broadcast_to(a.data, shape).copy(),
        (a,),
        lambda g: (_unbroadcast(g, a.data.shape),),
    )


def cumsum(a, axis):
    a = as_tensor(a)

    def vjp(g):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return _make(np.cumsum(a.data, axis=axis), (a,), vjp)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def getitem(a, key):
    a = as_tensor(a)
    out = a.data[key]

    def vjp(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, key, g)
        return (buf,)

    return _make(out.copy() if isinstance(out, np.ndarray) else out, (a,), vjp)


def take_rows(a, idx):
    """Gather rows of a 2-D tensor; backward scatter-adds through kernels."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"take_rows expects a matrix, got {a.shape}")
    idx = np.asarray(idx, dtype=np.int64)
    flat = idx.reshape(-1)
    out = a.data[flat].reshape(idx.shape + (a.data.shape[1],))

    def vjp(g):
        g2 = np.ascontiguousarray(g.reshape(-1, a.data.shape[1]))
        return (kernels.scatter_add_rows(g2, flat, a.data.shape[0]),)

    return _make(out, (a,), vjp)


def take(a, idx, axis=0):
    """Gather along one axis with an integer index array."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.take(a.data, idx, axis=axis)

    def vjp(g):
        buf = np.zeros_like(a.data)
        sl = (slice(None),) * axis
        np.add.at(buf, sl + (idx,), g)
        return (buf,)

    return _make(out, (a,), vjp)


# ---------------------------------------------------------------------------
# fused numerical ops


def softmax(a, mask=None, axis=-1):
    """Stabilized softmax; masked entries get exactly zero weight.

    Raises MaskingError naming the first fully masked row.
    """
    a = as_tensor(a)
    x = a.data
    if mask is None:
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        counts = mask.sum(axis=axis)
        if not counts.all():
            bad = np.unravel_index(int(np.flatnonzero(counts == 0)[0]), counts.shape)
            raise MaskingError(f"softmax row {bad} is fully masked")
        neg = np.where(mask, x, -np.inf)
        top = neg.max(axis=axis, keepdims=True)
        e = np.where(mask, np.exp(neg - top), 0.0)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (a,), vjp)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def vjp(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), vjp)


def layer_norm(a, gamma, beta, eps=1e-6):
    """Normalize over the last axis, then scale and shift."""
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    n = x.shape[-1]

    def vjp(g):
        g_xhat = g * gamma.data
        term = g_xhat - g_xhat.mean(axis=-1, keepdims=True)
        term -= xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True)
        g_x = inv * term
        g_gamma = _unbroadcast(g * xhat, gamma.data.shape)
        g_beta = _unbroadcast(g, beta.data.shape)
        return g_x, g_gamma, g_beta

    return _make(out, (a, gamma, beta), vjp)


def huber(pred, target, delta=1.0):
    """Elementwise piecewise-quadratic regression penalty vs a constant target."""
    pred = as_tensor(pred)
    tgt = np.asarray(target, dtype=np.float64)
    if pred.data.shape != tgt.shape:
        raise ShapeError(f"huber shapes disagree: {pred.shape} vs {tgt.shape}")
    err = pred.data - tgt
    a_err = np.abs(err)
    quad = a_err <= delta
    out = np.where(quad, 0.5 * err * err, delta * (a_err - 0.5 * delta))

    def vjp(g):
        return (g * np.where(quad, err, delta * np.sign(err)),)

    return _make(out, (pred,), vjp)


def scaled_dot_attention(q, k, v, mask, scale, allow_empty=False):
    """Fused attention core; see hpnet.kernels for shapes and semantics."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    mask = np.asarray(mask, dtype=bool)
    try:
        out, probs = kernels.sdpa_forward(
            q.data, k.data, v.data, mask, scale, allow_empty=allow_empty
        )
    except kernels.EmptyKeyRowError as exc:
        raise MaskingError(str(exc)) from None

    def vjp(g):
        return kernels.sdpa_backward(
            np.ascontiguousarray(g), probs, q.data, k.data, v.data, scale
        )

    result = _make(out, (q, k, v), vjp)
    return result, probs


def dropout(a, rate, rng):
    """Inverted dropout; identity when rate is 0."""
    if rate <= 0.0:
        return a
    a = as_tensor(a)
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, constant(keep))
