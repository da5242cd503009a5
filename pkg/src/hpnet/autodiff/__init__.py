from hpnet.autodiff.checkpoint import (
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from hpnet.autodiff.gradcheck import GradCheckError, grad_check
from hpnet.autodiff.nn import (
    ACTIVATIONS,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    ParamStore,
    TwoLayerMLP,
)
from hpnet.autodiff.tensor import (
    GradientMap,
    MaskingError,
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    concat,
    constant,
    dropout,
    exp,
    huber,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mul,
    neg,
    reshape,
    scaled_dot_attention,
    sigmoid,
    silu,
    softmax,
    sqrt,
    stop_gradient,
    sub,
    take,
    take_rows,
    tanh,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "ACTIVATIONS",
    "CheckpointError",
    "GradCheckError",
    "GradientMap",
    "LayerNorm",
    "Linear",
    "MaskingError",
    "MultiHeadAttention",
    "ParamStore",
    "ShapeError",
    "Tape",
    "Tensor",
    "TwoLayerMLP",
    "add",
    "as_tensor",
    "broadcast_to",
    "concat",
    "constant",
    "dropout",
    "exp",
    "grad_check",
    "huber",
    "layer_norm",
    "load_checkpoint",
    "log",
    "log_softmax",
    "matmul",
    "mul",
    "neg",
    "reshape",
    "save_checkpoint",
    "scaled_dot_attention",
    "sigmoid",
    "silu",
    "softmax",
    "sqrt",
    "stop_gradient",
    "sub",
    "take",
    "take_rows",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
]
