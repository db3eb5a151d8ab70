"""Correctly rounded sums and averages of float ranges.

Ball averages are compared for exact equality across three code paths (naive
enumeration, per-center sorting, interval prefix sums). That only works if the
result does not depend on summation order, so a ball average is always the
correctly rounded value of the exact rational ``sum(w f) / sum(w)``, and a sum
is the correctly rounded exact sum (``math.fsum`` semantics).

Exactness also buys the identities one expects of an average: a singleton
average returns ``f(x)`` itself, a constant averages to that constant, and
``f <= g`` implies ``avg f <= avg g`` without rounding exceptions.

:class:`ExactPrefix` and :class:`AveragePrefix` answer range queries in O(1)
by keeping prefix sums as Python integers in a common fixed-point scale.
CPython's ``int / int`` is correctly rounded, so the final division loses
nothing extra.
"""

import math

import numpy as np


def _scale_of(values):
    # every finite double is num / 2**e; the largest denominator makes all integral
    den = 1
    for v in values:
        d = v.as_integer_ratio()[1]
        if d > den:
            den = d
    return den


def to_fixed(values):
    """Return ``(ints, scale)`` with ``values[i] == ints[i] / scale`` exactly."""
    vals = [float(v) for v in values]
    for v in vals:
        if not math.isfinite(v):
            raise ValueError("exact summation requires finite values")
    scale = _scale_of(vals)
    ints = []
    for v in vals:
        num, den = v.as_integer_ratio()
        ints.append(num * (scale // den))
    return ints, scale


class ExactPrefix:
    """Prefix sums of a float sequence, exact, with correctly rounded queries."""

    def __init__(self, values):
        ints, self.scale = to_fixed(np.asarray(values, dtype=float).ravel())
        acc = 0
        prefix = [0]
        for v in ints:
            acc += v
            prefix.append(acc)
        self.prefix = prefix

    def __len__(self):
        return len(self.prefix) - 1

    def range_sum(self, lo, hi):
        """Correctly rounded sum of ``values[lo:hi]``."""
        return (self.prefix[hi] - self.prefix[lo]) / self.scale

    def total(self):
        return self.prefix[-1] / self.scale


class AveragePrefix:
    """Prefix sums of ``w * f`` and ``w`` for correctly rounded range averages."""

    def __init__(self, w, f):
        wi, self.w_scale = to_fixed(np.asarray(w, dtype=float).ravel())
        fi, self.f_scale = to_fixed(np.asarray(f, dtype=float).ravel())
        num = den = 0
        pn, pd = [0], [0]
        for a, b in zip(wi, fi):
            num += a * b
            den += a
            pn.append(num)
            pd.append(den)
        self.num, self.den = pn, pd

    def average(self, lo, hi):
        """``sum(w f) / sum(w)`` over ``[lo, hi)``, correctly rounded."""
        return (self.num[hi] - self.num[lo]) / ((self.den[hi] - self.den[lo]) * self.f_scale)


def exact_average(w, f):
    """Correctly rounded ``sum(w f) / sum(w)``."""
    p = AveragePrefix(w, f)
    return p.average(0, len(p.den) - 1)


def exact_sum(values):
    """Correctly rounded sum of ``values`` (a thin alias of ``math.fsum``)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())
