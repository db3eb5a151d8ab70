"""Exact Hardy-Littlewood maximal function on finite spaces.

On a finite space every open ball equals one of the sets
``{y : d(c, y) <= t}`` with ``t`` a distance value from center ``c``, so the
supremum over balls is a maximum over that finite family. Ties go to the
lexicographically first ``(center, threshold)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._exact import exact_average
from .errors import EmptyBall, MaxblowError, NotIntervalStructured
from .space import SpaceDescriptor
from .varlp import PointFunction, _values


@dataclass(frozen=True, eq=False)
class MaximalResult:
    values: np.ndarray
    argmax_center: np.ndarray
    argmax_threshold: np.ndarray

    @property
    def argmax_ball(self):
        return list(zip(self.argmax_center.tolist(), self.argmax_threshold.tolist()))

    def csv_rows(self, f):
        fv = _values(f)
        yield "point,f,Mf,argmax_center,argmax_threshold"
        for x in range(self.values.size):
            yield (
                f"{x},{fv[x]:.12g},{self.values[x]:.12g},"
                f"{int(self.argmax_center[x])},{self.argmax_threshold[x]:.12g}"
            )


def ball_average(space: SpaceDescriptor, members, f) -> float:
    """Correctly rounded value of the exact ``sum(w f) / sum(w)`` over ``members``."""
    idx = np.fromiter(sorted(members), dtype=np.int64)
    if idx.size == 0:
        raise EmptyBall("average over an empty ball")
    fv = _values(f)
    return exact_average(space.weight[idx], fv[idx])


def _prepare(space, f):
    fv = _values(f)
    if fv.size != space.n:
        raise MaxblowError(f"function has {fv.size} values, space has {space.n} points")
    if not np.all(np.isfinite(fv)) or np.any(fv < 0):
        raise MaxblowError("function values must be finite and nonnegative")
    return fv


def maximal_function(space: SpaceDescriptor, f) -> MaximalResult:
    """``Mf`` over the full distinct-ball family, O(n^2 log n)."""
    fv = _prepare(space, f)
    w = space.weight
    val, argc, argt = kernels.maximal_general(space.dist, w, fv)
    return MaximalResult(val, argc, argt)


def maximal_function_interval(space: SpaceDescriptor, f) -> MaximalResult:
    """Same values as :func:`maximal_function` for 1-d interval spaces, O(n^2).

    Balls are contiguous ranges in coordinate order, and their sums come from
    exact prefix sums.
    """
    if not space.is_interval:
        raise NotIntervalStructured("space lacks 1-d coordinates with |x - y| distances")
    fv = _prepare(space, f)
    x = space.coords[:, 0]
    order = np.argsort(x, kind="stable")
    w = space.weight[order]
    val_s, argc_s, argt_s = kernels.maximal_interval(x[order], w, fv[order], order)
    val = np.empty(space.n)
    argc = np.empty(space.n, dtype=np.int64)
    argt = np.empty(space.n)
    val[order] = val_s
    argc[order] = order[argc_s]
    argt[order] = argt_s
    return MaximalResult(val, argc, argt)


def maximal(space: SpaceDescriptor, f) -> MaximalResult:
    """Dispatch to the interval path when the space allows it."""
    if space.is_interval:
        return maximal_function_interval(space, f)
    return maximal_function(space, f)
