"""Convolution kernel backends.

Two interchangeable implementations of the hot conv2d forward/backward
kernels: a compiled Cython extension (``_convcore``) and a numpy fallback
(``_convpy``). The backend is selected once at import time:

* ``NODULEMINE_KERNELS=compiled`` forces the extension (ImportError if the
  build is missing),
* ``NODULEMINE_KERNELS=numpy`` forces the fallback,
* unset or ``auto`` prefers the compiled extension when importable.

Both backends take pre-padded NCHW float64 arrays and agree to floating
point roundoff; ``benchmarks/bench_conv.py`` compares their speed.
"""

import os

from . import _convpy

_requested = os.environ.get("NODULEMINE_KERNELS", "auto").lower()

if _requested not in ("auto", "compiled", "numpy"):
    raise ValueError(
        f"NODULEMINE_KERNELS must be 'auto', 'compiled' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = _convpy
    BACKEND = "numpy"
else:
    try:
        from . import _convcore as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _convpy
        BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'numpy'."""
    return BACKEND
