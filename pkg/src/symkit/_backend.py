"""Kernel backend selection.

The compiled extension is used when it imports cleanly; set
``SYMKIT_PURE_PYTHON=1`` to force the reference implementation.
"""

import os

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available():
    return sorted(_BACKENDS)


def get(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})") from None


if os.environ.get("SYMKIT_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    kernels = _kernels_py
else:
    kernels = _ckernels

BACKEND = kernels.NAME
