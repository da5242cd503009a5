"""Parameterized building blocks: linear maps, two-layer MLPs, multi-head
attention and layer normalization, allocated through a named ParamStore so
checkpoints are flat name -> array mappings."""

from __future__ import annotations

import zlib

import numpy as np

from hpnet.autodiff import tensor as T
from hpnet.autodiff.tensor import ShapeError, Tensor

ACTIVATIONS = {
    "silu": T.silu,
    "tanh": T.tanh,
    "sigmoid": T.sigmoid,
}


class ParamStore:
    """Flat registry of named trainable tensors.

    Initial values are seeded per parameter NAME (not by allocation order),
    so two models sharing a sub-architecture share those parameters'
    initializations exactly, whatever else differs between them.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.Generator):
            raise TypeError("ParamStore takes an integer seed")
        self.seed = int(seed)
        self.tensors: dict[str, Tensor] = {}

    def _rng(self, name):
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, zlib.crc32(name.encode())])
        )

    def new(self, name, data):
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self.tensors[name] = t
        return t

    def xavier(self, name, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return self.new(
            name, self._rng(name).uniform(-bound, bound, size=(fan_in, fan_out))
        )

    def zeros(self, name, shape):
        return self.new(name, np.zeros(shape))

    def ones(self, name, shape):
        return self.new(name, np.ones(shape))

    def normal(self, name, shape, std=0.02):
        return self.new(name, self._rng(name).normal(0.0, std, size=shape))

    def arrays(self):
        return {name: t.data for name, t in self.tensors.items()}

    def load_arrays(self, arrays):
        missing = set(self.tensors) - set(arrays)
        extra = set(arrays) - set(self.tensors)
        if missing or extra:
            raise KeyError(
                f"parameter set mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for name, t in self.tensors.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeError(
                    f"checkpoint shape for {name} is {arr.shape}, expected {t.data.shape}"
                )
            t.data = arr.copy()


class Linear:
    def __init__(self, store, name, d_in, d_out, bias=True):
        self.w = store.xavier(f"{name}.w", d_in, d_out)
        self.b = store.zeros(f"{name}.b", (d_out,)) if bias else None

    def __call__(self, x):
        if x.ndim == 2:
            out = T.matmul(x, self.w)
            return out + self.b if self.b is not None else out
        # flatten leading axes: one 2-D GEMM instead of a batched loop
        lead = x.shape[:-1]
        flat = T.reshape(x, (-1, x.shape[-1]))
        out = T.matmul(flat, self.w)
        if self.b is not None:
            out = out + self.b
        return T.reshape(out, lead + (self.w.shape[1],))


class TwoLayerMLP:
    """linear -> activation -> linear; the encoder/decoder workhorse."""

    def __init__(self, store, name, d_in, d_hidden, d_out, activation="silu"):
        self.lin1 = Linear(store, f"{name}.l1", d_in, d_hidden)
        self.lin2 = Linear(store, f"{name}.l2", d_hidden, d_out)
        self.act = ACTIVATIONS[activation]

    def __call__(self, x):
        return self.lin2(self.act(self.lin1(x)))


class LayerNorm:
    def __init__(self, store, name, dim):
        self.gamma = store.ones(f"{name}.g", (dim,))
        self.beta = store.zeros(f"{name}.b", (dim,))

    def __call__(self, x):
        return T.layer_norm(x, self.gamma, self.beta)


class MultiHeadAttention:
    """Per-head scaled dot-product attention with masked key sets.

    Queries are [..., Q, D]; keys/values [..., S, d_key]/[..., S, d_value]
    with the same leading batch axes; the boolean mask is [..., S]. Masked
    keys get exactly zero weight. A query whose keys are all masked raises
    MaskingError unless allow_empty is set, in which case its mixture is
    zero (callers keep the residual path).
    """

    def __init__(self, store, name, d_model, heads, d_key=None, d_value=None):
        if d_model % heads:
            raise ShapeError(f"heads={heads} must divide d_model={d_model}")
        d_key = d_model if d_key is None else d_key
        d_value = d_key if d_value is None else d_value
        self.heads = heads
        self.d_model = d_model
        self.d_head = d_model // heads
        self.wq = Linear(store, f"{name}.q", d_model, d_model)
        self.wk = Linear(store, f"{name}.k", d_key, d_model)
        self.wv = Linear(store, f"{name}.v", d_value, d_model)
        self.wo = Linear(store, f"{name}.o", d_model, d_model)

    def __call__(self, query, keys, values, mask=None, allow_empty=False, trace=None):
        squeeze = query.ndim == 2
        if squeeze:
            query = T.reshape(query, (1,) + query.shape)
            keys = T.reshape(keys, (1,) + keys.shape)
            values = T.reshape(values, (1,) + values.shape)
        if query.ndim != 3 or keys.ndim != 3 or values.ndim != 3:
            raise ShapeError(
                f"attention expects [B,Q,D]/[B,S,Dk], got {query.shape} and {keys.shape}"
            )
        b, nq, _ = query.shape
        s = keys.shape[1]
        if values.shape[1] != s:
            raise ShapeError(f"keys/values rows disagree: {keys.shape} vs {values.shape}")
        if mask is None:
            mask = np.ones((b, s), dtype=bool)
        else:
            mask = np.asarray(mask, dtype=bool).reshape(b, s)

        q = T.reshape(self.wq(query), (b, nq, self.heads, self.d_head))
        k = T.reshape(self.wk(keys), (b, s, self.heads, self.d_head))
        v = T.reshape(self.wv(values), (b, s, self.heads, self.d_head))
        mixed, probs = T.scaled_dot_attention(
            q, k, v, mask, 1.0 / np.sqrt(self.d_head), allow_empty=allow_empty
        )
        if trace is not None:
            trace.append(probs)
        out = self.wo(T.reshape(mixed, (b, nq, self.d_model)))
        if squeeze:
            out = T.reshape(out, out.shape[1:])
        return out
