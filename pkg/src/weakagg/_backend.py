"""Kernel backend selection.

Set WEAKAGG_BACKEND=numpy to force the pure-numpy kernels, =numba to require
the jitted ones. The default ("auto") uses numba when it imports, numpy
otherwise. The choice is made once at import time.
"""

import os

from . import _kernels_np
from .errors import ConfigError


def _select():
    choice = os.environ.get("WEAKAGG_BACKEND", "auto").strip().lower()
    if choice == "numpy":
        return _kernels_np, "numpy"
    if choice in ("auto", "numba"):
        try:
            from . import _kernels_nb
        except ImportError:
            if choice == "numba":
                raise
            return _kernels_np, "numpy"
        return _kernels_nb, "numba"
    raise ConfigError(f"unknown WEAKAGG_BACKEND value {choice!r} (use auto, numba, or numpy)")


_impl, _name = _select()


def kernels():
    """The active kernel module (forward/backward)."""
    return _impl


def backend_name() -> str:
    return _name
