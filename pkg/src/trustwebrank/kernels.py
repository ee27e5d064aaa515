"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``TRUSTWEBRANK_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("TRUSTWEBRANK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _fallback
    else:
        BACKEND = "cython"
else:
    _impl = _fallback

truncated_walk_rows = _impl.truncated_walk_rows
edge_step = _impl.edge_step


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def get_backend(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
