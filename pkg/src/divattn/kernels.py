"""Select the spatial-attention kernel implementation at import.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``DIVATTN_KERNEL=python`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DIVATTN_KERNEL", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def spatial_forward(F, Ws, bs, ws2, bs2):
    return _impl.spatial_forward(_c(F), _c(Ws), _c(bs), _c(ws2), _c(bs2))


def spatial_backward(F, Ws, ws2, H, S, gX, gS):
    return _impl.spatial_backward(_c(F), _c(Ws), _c(ws2), _c(H), _c(S), _c(gX), _c(gS))


def fallback():
    """The pure numpy implementation, regardless of which backend is active."""
    return _kernels_py
