"""Variable exponent Lebesgue spaces on finite measure spaces.

Exponents live in ``[1, inf]``; ``math.inf`` marks the points of ``X_inf``.
Functions are stored as nonnegative magnitudes since every quantity here
depends on ``|f|`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MaxblowError, NonpositiveTolerance
from .space import SpaceDescriptor

DEFAULT_TOL = 1e-10
MAX_ITER = 400


@dataclass(frozen=True, eq=False)
class ExponentFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if np.any(np.isnan(v)) or np.any(v < 1):
            raise MaxblowError("exponents must lie in [1, inf]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, p, n):
        return cls(np.full(n, float(p)))

    @property
    def infinite(self):
        """Mask of ``X_inf``."""
        return np.isinf(self.values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class PointFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise MaxblowError("function values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class NormResult:
    value: float
    iterations: int
    bracket: tuple

    def record(self):
        lo, hi = self.bracket
        return f"norm={self.value:.12g} lo={lo:.12g} hi={hi:.12g} iters={self.iterations}"


def _values(obj):
    return obj.values if hasattr(obj, "values") else np.asarray(obj, dtype=float)


def _check_shapes(space, p, f):
    if len(p) != space.n or len(f) != space.n:
        raise MaxblowError(
            f"shape mismatch: space has {space.n} points, exponent {len(p)}, function {len(f)}"
        )


def essential_infimum(p: ExponentFunction, space: SpaceDescriptor) -> float:
    """``p_-``: every point has positive mass, so this is the plain minimum."""
    if len(p) != space.n:
        raise MaxblowError("exponent does not match the space")
    return float(np.min(p.values))


class _Modular:
    """``lam -> modular(f / lam)`` with the exponent split precomputed."""

    def __init__(self, space, p, f):
        pv, fv = _values(p), _values(f)
        fin = ~np.isinf(pv)
        self.w = space.weight[fin]
        self.f = fv[fin]
        self.p = pv[fin]
        self.sup = float(fv[~fin].max()) if np.any(~fin) else 0.0

    def __call__(self, lam=1.0):
        with np.errstate(over="ignore"):
            terms = self.w * (self.f / lam) ** self.p
        try:
            total = math.fsum(terms.tolist()) if terms.size else 0.0
        except OverflowError:
            return math.inf
        return total + self.sup / lam


def modular(space: SpaceDescriptor, p: ExponentFunction, f: PointFunction) -> float:
    """``sum_{p<inf} w f^p + max_{p=inf} f``."""
    _check_shapes(space, p, f)
    return _Modular(space, p, f)()


def luxemburg_norm(
    space: SpaceDescriptor, p: ExponentFunction, f: PointFunction, tol: float = DEFAULT_TOL
) -> NormResult:
    """``inf{lam > 0 : modular(f / lam) <= 1}`` by bisection on a certified bracket.

    The returned value is the upper end ``hi`` of the final bracket, so
    ``modular(f / value) <= 1`` always holds, while ``modular(f / lo) > 1``.
    """
    if not (0 < tol <= 1e-3):
        raise NonpositiveTolerance(f"tolerance must lie in (0, 1e-3], got {tol}")
    _check_shapes(space, p, f)
    fv = _values(f)
    top = float(fv.max())
    if top == 0.0:
        return NormResult(0.0, 0, (0.0, 0.0))
    # bisect on f * 2**e with max in [1, 2); power-of-two scaling is exact, and
    # it keeps the bracket clear of overflow and underflow for extreme inputs
    e = -math.frexp(top)[1] + 1
    rho = _Modular(space, p, np.ldexp(fv, e))
    hi = math.ldexp(top, e) * max(1.0, space.total_measure)
    iters = 0
    while rho(hi) > 1:
        hi *= 2.0
        iters += 1
    lo = hi * 2.0**-60
    while rho(lo) <= 1:
        hi, lo = lo, lo * 2.0**-60
        iters += 1
    # geometric midpoints shrink the ratio hi/lo, which is what the tolerance bounds
    while hi - lo > tol * hi and iters < MAX_ITER:
        mid = math.sqrt(lo) * math.sqrt(hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        if rho(mid) <= 1:
            hi = mid
        else:
            lo = mid
        iters += 1
    lo, hi = math.ldexp(lo, -e), math.ldexp(hi, -e)
    return NormResult(hi, iters, (lo, hi))


def constant_p_norm(space: SpaceDescriptor, p_const: float, f: PointFunction) -> float:
    """Closed-form ``L^p`` norm for a constant exponent."""
    if not p_const >= 1:
        raise MaxblowError(f"exponent must be >= 1, got {p_const}")
    fv = _values(f)
    if len(fv) != space.n:
        raise MaxblowError("function does not match the space")
    if math.isinf(p_const):
        return float(fv.max())
    return math.fsum((space.weight * fv**p_const).tolist()) ** (1.0 / p_const)
