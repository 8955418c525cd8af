"""Kernel backend selection.

The environment variable MFLOW_BACKEND picks the kernel implementation:
"cython" requires the compiled extension, "numpy" forces the pure-python
module, and "auto" (the default) prefers the extension when it imported
cleanly.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_ext
except ImportError:
    _kernels_ext = None


def select_backend(name=None):
    """Return (kernel module, backend name) for the requested backend."""
    if name is None:
        name = os.environ.get("MFLOW_BACKEND", "auto")
    if name == "numpy":
        return _kernels_py, "numpy"
    if name == "cython":
        if _kernels_ext is None:
            raise RuntimeError(
                "MFLOW_BACKEND=cython but the compiled extension is not available")
        return _kernels_ext, "cython"
    if name == "auto":
        if _kernels_ext is not None:
            return _kernels_ext, "cython"
        return _kernels_py, "numpy"
    raise ValueError(f"unknown backend {name!r} (use auto, cython or numpy)")


KERNELS, BACKEND = select_backend()
