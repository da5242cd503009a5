"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; the numpy
reference is the fallback. ``HPNET_KERNELS=numpy|native`` forces a choice
(forcing ``native`` raises if the extension is unavailable, rather than
silently running the slow path).
"""

import os

from hpnet.kernels import reference
from hpnet.kernels.reference import EmptyKeyRowError

_requested = os.environ.get("HPNET_KERNELS", "").strip().lower()

if _requested == "numpy":
    _impl = reference
else:
    try:
        from hpnet.kernels import _core as _impl
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "HPNET_KERNELS=native but the compiled kernel extension is "
                "not built; run `pip install -e .` or `python setup.py "
                "build_ext --inplace`"
            )
        _impl = reference

BACKEND = _impl.BACKEND
sdpa_forward = _impl.sdpa_forward
sdpa_backward = _impl.sdpa_backward
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "EmptyKeyRowError",
    "reference",
    "scatter_add_rows",
    "sdpa_backward",
    "sdpa_forward",
]
