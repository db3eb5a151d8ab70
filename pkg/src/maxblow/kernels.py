"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over with identical results. ``MAXBLOW_PURE=1`` forces the
fallback. ``MAXBLOW_THREADS`` caps the thread count of the compiled kernels
(``0`` or unset means one thread per available CPU).
"""

import os

from . import _kernels_py

try:
    if os.environ.get("MAXBLOW_PURE", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _backend
except ImportError:
    _backend = _kernels_py

BACKEND = _backend.NAME


def threads():
    try:
        cap = int(os.environ.get("MAXBLOW_THREADS", "0"))
    except ValueError:
        cap = 0
    if cap > 0:
        return cap
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def maximal_general(dist, w, f):
    return _backend.maximal_general(dist, w, f, threads())


def maximal_interval(xs, w, f, ids):
    return _backend.maximal_interval(xs, w, f, ids, threads())


def quasi_triangle(dist):
    return _backend.quasi_triangle(dist, threads())
