"""Kernel backend selection.

The compiled extension is used when it imports; ``BBIS_BACKEND=python`` forces
the numpy fallback. ``BBIS_KERNEL_THREADS`` sets the OpenMP thread count used
inside compiled kernels (default 1, since replicates are parallelized above).
"""

import os

from . import _pykernels

_requested = os.environ.get("BBIS_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        kernels = _pykernels
        BACKEND = "python"

_threads = max(1, int(os.environ.get("BBIS_KERNEL_THREADS", "1")))


def kernel_threads():
    return _threads


def set_kernel_threads(n):
    global _threads
    _threads = max(1, int(n))


def available_backends():
    """Mapping of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["compiled"] = _ckernels
    except ImportError:
        pass
    return out
