"""Finite quasi-metric measure spaces.

A space is a set of points ``0..n-1`` with positive point masses and a
distance that is either an explicit ``n x n`` table or derived on demand from
coordinates and a metric tag. Coordinate-backed spaces never materialize the
full table unless asked to, which keeps the generated million-point tori and
dyadic grids cheap to hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from ._exact import ExactPrefix
from .errors import (
    AlphaOutOfRange,
    DepthOutOfRange,
    EmptyWindow,
    InvalidPoint,
    NegativeDistance,
    NonpositiveRadius,
    NonzeroDiagonal,
    ParseError,
    SizeOutOfRange,
    SpaceError,
    ZeroDistanceOffDiagonal,
)

METRICS = ("l2", "linf", "circle")

# refuse to build dense tables larger than this many entries (~512 MB)
MAX_TABLE_ENTRIES = 1 << 26


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _coord_distances(coords, metric, x):
    """Distances from point ``x`` to every point of a coordinate space."""
    diff = np.abs(coords - coords[x])
    if metric == "circle":
        diff = np.minimum(diff, 1.0 - diff)
    if coords.shape[1] == 1:
        return diff[:, 0].copy()
    if metric == "l2":
        return np.sqrt(np.sum(diff * diff, axis=1))
    return diff.max(axis=1)


@dataclass(frozen=True, eq=False)
class SpaceDescriptor:
    """Points ``0..n-1``, per-point masses and a distance.

    Exactly one of ``table`` (explicit distances) or ``coords`` + ``metric``
    must define the distance. ``coords`` may also accompany a table purely
    as labels.
    """

    weight: np.ndarray
    table: np.ndarray | None = None
    coords: np.ndarray | None = None
    metric: str | None = None

    def __post_init__(self):
        w = _frozen(self.weight)
        if w.ndim != 1 or w.size == 0:
            raise SpaceError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise SpaceError("weights must be finite and strictly positive")
        object.__setattr__(self, "weight", w)
        n = w.size
        if self.coords is not None:
            c = _frozen(self.coords)
            if c.ndim == 1:
                c = _frozen(c.reshape(-1, 1))
            if c.shape[0] != n or not np.all(np.isfinite(c)):
                raise SpaceError("coordinates must be finite with one row per point")
            object.__setattr__(self, "coords", c)
        if self.table is not None:
            t = _frozen(self.table)
            if t.shape != (n, n):
                raise SpaceError(f"distance table must be {n}x{n}, got {t.shape}")
            if not np.all(np.isfinite(t)):
                raise SpaceError("distance table must be finite")
            object.__setattr__(self, "table", t)
            _check_axiom_a(t)
        else:
            if self.coords is None or self.metric not in METRICS:
                raise SpaceError("a space needs a distance table or coordinates with a metric")
            _check_distinct_coords(self.coords, self.metric)

    @property
    def n(self):
        return self.weight.size

    @property
    def points(self):
        return range(self.n)

    @property
    def labels(self):
        return self.coords

    def dist_row(self, x):
        self._check_point(x)
        if self.table is not None:
            return self.table[x]
        return _coord_distances(self.coords, self.metric, x)

    @cached_property
    def dist(self):
        """The full distance table (materialized once for coordinate spaces)."""
        if self.table is not None:
            return self.table
        if self.n * self.n > MAX_TABLE_ENTRIES:
            raise SizeOutOfRange(f"refusing to materialize a {self.n}x{self.n} distance table")
        return _frozen(np.stack([self.dist_row(x) for x in range(self.n)]))

    def distance(self, x, y):
        return float(self.dist_row(x)[y])

    @cached_property
    def total_measure(self):
        return math.fsum(self.weight.tolist())

    def mass(self, members):
        """Correctly rounded measure of a point set."""
        idx = np.fromiter(members, dtype=np.int64) if not isinstance(members, np.ndarray) else members
        return math.fsum(self.weight[idx].tolist())

    @cached_property
    def is_interval(self):
        """True when distances are ``|x_i - x_j|`` of 1-d coordinate labels."""
        if self.coords is None or self.coords.shape[1] != 1:
            return False
        if self.table is None:
            return self.metric in ("l2", "linf")
        x = self.coords[:, 0]
        return bool(np.array_equal(self.table, np.abs(x[:, None] - x[None, :])))

    def _check_point(self, x):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n):
            raise InvalidPoint(f"no point {x!r} in a space of {self.n} points")

    def __eq__(self, other):
        if not isinstance(other, SpaceDescriptor):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            same(self.weight, other.weight)
            and same(self.table, other.table)
            and same(self.coords, other.coords)
            and self.metric == other.metric
        )

    __hash__ = None


def _check_axiom_a(t):
    if np.any(t < 0):
        i, j = np.argwhere(t < 0)[0]
        raise NegativeDistance(f"dist({i},{j}) = {t[i, j]} < 0")
    diag = np.diagonal(t)
    if np.any(diag != 0):
        i = int(np.flatnonzero(diag)[0])
        raise NonzeroDiagonal(f"dist({i},{i}) = {diag[i]} != 0")
    off = t == 0
    np.fill_diagonal(off, False)
    if np.any(off):
        i, j = np.argwhere(off)[0]
        raise ZeroDistanceOffDiagonal(f"dist({i},{j}) = 0 for distinct points")


def _check_distinct_coords(coords, metric):
    c = np.mod(coords, 1.0) if metric == "circle" else coords
    if np.unique(c, axis=0).shape[0] != c.shape[0]:
        raise ZeroDistanceOffDiagonal("two points share the same coordinates")


# -- quasi-metric certificate ------------------------------------------------

@dataclass(frozen=True)
class QuasiMetricCertificate:
    c0: float
    c1: float

    @property
    def symmetric(self):
        return self.c0 == 1.0


def verify_quasi_metric(dist) -> QuasiMetricCertificate:
    """Minimal symmetry and quasi-triangle constants of a distance table."""
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise SpaceError("distance table must be a nonempty square array")
    if not np.all(np.isfinite(d)):
        raise SpaceError("distance table must be finite")
    _check_axiom_a(d)
    n = d.shape[0]
    if n < 2:
        return QuasiMetricCertificate(1.0, 1.0)
    off = ~np.eye(n, dtype=bool)
    c0 = max(1.0, float(np.max(d.T[off] / d[off])))
    c1 = 1.0 if n < 3 else max(1.0, kernels.quasi_triangle(np.ascontiguousarray(d)))
    return QuasiMetricCertificate(c0, c1)


# -- balls -------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    members: frozenset


def open_ball(space: SpaceDescriptor, x: int, r: float) -> Ball:
    """``B(x, r) = {y : d(x, y) < r}``."""
    space._check_point(x)
    if not r > 0:
        raise NonpositiveRadius(f"radius must be positive, got {r}")
    row = space.dist_row(x)
    return Ball(int(x), float(r), frozenset(np.flatnonzero(row < r).tolist()))


@dataclass(frozen=True)
class BallEntry:
    center: int
    threshold: float
    members: frozenset


def center_ball_family(space: SpaceDescriptor, x: int) -> list[BallEntry]:
    """All distinct balls around ``x``, one per distinct distance value."""
    row = space.dist_row(x)
    order = np.argsort(row, kind="stable")
    srow = row[order]
    out = []
    # the closed sublevel set at t equals the open ball of any radius in (t, next]
    ends = np.flatnonzero(np.r_[srow[1:] != srow[:-1], True])
    for e in ends:
        out.append(BallEntry(int(x), float(srow[e]), frozenset(order[: e + 1].tolist())))
    return out


def distinct_ball_family(space: SpaceDescriptor) -> list[BallEntry]:
    family = []
    for x in space.points:
        family.extend(center_ball_family(space, x))
    return family


# -- ball measures in bulk ---------------------------------------------------

class BallMasses:
    """Correctly rounded ``mu(B(x, r))`` for many centers and radii.

    ``weights`` may replace the space's own masses, e.g. by ``w * 1_E`` to
    measure ``E`` inside balls. Interval spaces use exact prefix sums over the
    coordinate order; other spaces sort one distance row per center.
    """

    def __init__(self, space: SpaceDescriptor, weights=None):
        self.space = space
        w = space.weight if weights is None else np.asarray(weights, dtype=float)
        self.w = w
        if space.is_interval:
            x = space.coords[:, 0]
            self.order = np.argsort(x, kind="stable")
            self.rank = np.empty_like(self.order)
            self.rank[self.order] = np.arange(space.n)
            self.xs = x[self.order]
            prefix = ExactPrefix(w[self.order])
            self.prefix = np.array(prefix.prefix, dtype=object)
            self.scale = prefix.scale

    def _interval_edges(self, c, r):
        """Sorted-order bounds ``[lo, hi)`` of ``{j : |xs[j] - xs[c]| < r}`` for centers ``c``.

        Bisection on the distance predicate itself, so the result matches
        :func:`open_ball` bit for bit.
        """
        xs, n = self.xs, self.xs.size
        xc = xs[c]
        # right edge: first j > c failing the predicate, in [c + 1, n]
        lo, hi = c + 1, np.full_like(c, n)
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            inside = np.abs(xs[np.minimum(mid, n - 1)] - xc) < r
            active = lo < hi
            lo = np.where(active & inside, mid + 1, lo)
            hi = np.where(active & ~inside, mid, hi)
        right = lo
        # left edge: last j < c failing the predicate plus one, in [0, c]
        lo, hi = np.zeros_like(c), c.copy()
        while np.any(lo < hi):
            mid = (lo + hi) // 2
            inside = np.abs(xs[mid] - xc) < r
            active = lo < hi
            hi = np.where(active & inside, mid, hi)
            lo = np.where(active & ~inside, mid + 1, lo)
        return lo, right

    def profiles(self, centers, radii):
        """Masses of ``B(x, r)``, shape ``(len(centers), len(radii))``."""
        centers = np.asarray(centers, dtype=np.int64).ravel()
        radii = np.asarray(radii, dtype=float).ravel()
        out = np.empty((centers.size, radii.size))
        if self.space.is_interval:
            c = self.rank[centers]
            for j, r in enumerate(radii):
                lo, hi = self._interval_edges(c, r)
                out[:, j] = ((self.prefix[hi] - self.prefix[lo]) / self.scale).astype(float)
            return out
        for i, x in enumerate(centers):
            row = self.space.dist_row(int(x))
            order = np.argsort(row, kind="stable")
            counts = np.searchsorted(row[order], radii, side="left")
            ws = self.w[order]
            out[i] = [math.fsum(ws[:k].tolist()) for k in counts]
        return out

    def profile(self, x, radii):
        return self.profiles([x], radii)[0]


# -- doubling certificates ---------------------------------------------------

@dataclass(frozen=True)
class RadiusWindow:
    r_min: float
    r_max: float
    grid: tuple

    def __post_init__(self):
        grid = tuple(float(r) for r in self.grid)
        object.__setattr__(self, "grid", grid)
        if not (self.r_min > 0 and self.r_max > 0):
            raise NonpositiveRadius("window radii must be positive")
        if self.r_min > self.r_max:
            raise EmptyWindow(f"r_min={self.r_min} exceeds r_max={self.r_max}")
        if not grid:
            raise EmptyWindow("window grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise EmptyWindow("window grid must be strictly increasing")
        if grid[0] < self.r_min or grid[-1] > self.r_max:
            raise EmptyWindow("window grid leaves [r_min, r_max]")

    @classmethod
    def geometric(cls, r_min, r_max, steps):
        if steps < 1:
            raise EmptyWindow("a window needs at least one radius")
        if steps == 1 or r_min == r_max:
            return cls(r_min, r_max, (r_max,))
        q = round((r_max / r_min) ** (1.0 / (steps - 1)))
        if q >= 2 and r_min * float(q) ** (steps - 1) == r_max:
            # integer ratios (dyadic ladders in particular) are built exactly
            grid = r_min * float(q) ** np.arange(steps)
        else:
            grid = np.geomspace(r_min, r_max, steps)
            grid[0], grid[-1] = r_min, r_max
        return cls(r_min, r_max, tuple(grid))

    @classmethod
    def dyadic(cls, r_min, r_max):
        """Radii ``r_max / 2**j`` down to ``r_min``; the ladder the annuli use."""
        if not (r_min > 0 and r_max > 0):
            raise NonpositiveRadius("window radii must be positive")
        grid = []
        r = float(r_max)
        while r >= r_min:
            grid.append(r)
            r /= 2
        return cls(r_min, r_max, tuple(reversed(grid)))

    @classmethod
    def for_space(cls, space: SpaceDescriptor):
        """Dyadic ladder from 4x the resolution up to the largest power of two below the diameter."""
        if space.n < 2:
            return cls.dyadic(1.0, 1.0)
        if space.is_interval:
            xs = np.sort(space.coords[:, 0])
            res = float(np.min(np.diff(xs)))
            diam = float(xs[-1] - xs[0])
        else:
            d = space.dist
            res = float(np.min(d[d > 0]))
            diam = float(np.max(d))
        r_max = 2.0 ** math.floor(math.log2(diam))
        if r_max >= diam:
            r_max /= 2
        return cls.dyadic(min(4 * res, r_max), r_max)


@dataclass(frozen=True)
class DoublingCertificate:
    a_const: float
    delta_const: float
    a_witness: tuple
    delta_witness: tuple
    window: RadiusWindow

    @property
    def reverse_doubling(self):
        return self.delta_const < 1.0

    @property
    def reverse_doubling_fails(self):
        return not self.reverse_doubling


def doubling_certificate(space: SpaceDescriptor, window: RadiusWindow) -> DoublingCertificate:
    """Worst doubling and reverse doubling ratios over all centers and window radii."""
    if not window.grid:
        raise EmptyWindow("window grid is empty")
    radii = np.asarray(window.grid)
    both = np.concatenate([radii, radii / 2])
    m = len(radii)
    prof = BallMasses(space).profiles(np.arange(space.n), both)
    big, half = prof[:, :m], prof[:, m:]
    a_ratio = big / half
    d_ratio = half / big
    ia = np.unravel_index(np.argmax(a_ratio), a_ratio.shape)
    idl = np.unravel_index(np.argmax(d_ratio), d_ratio.shape)
    return DoublingCertificate(
        a_const=float(a_ratio[ia]),
        delta_const=float(d_ratio[idl]),
        a_witness=(int(ia[0]), float(radii[ia[1]])),
        delta_witness=(int(idl[0]), float(radii[idl[1]])),
        window=window,
    )


# -- generators --------------------------------------------------------------

def gen_dyadic_interval(L: int) -> SpaceDescriptor:
    """``2**L`` cells of ``[0, 1)`` at their centers with Lebesgue mass."""
    return gen_power_weight(L, 0.0)


def gen_power_weight(L: int, alpha: float) -> SpaceDescriptor:
    if not (isinstance(L, (int, np.integer)) and 1 <= L <= 24):
        raise DepthOutOfRange(f"depth must be in 1..24, got {L}")
    if not (0 <= alpha <= 3):
        raise AlphaOutOfRange(f"alpha must be in [0, 3], got {alpha}")
    n = 1 << L
    centers = (2 * np.arange(n, dtype=float) + 1) / 2.0 ** (L + 1)
    weight = np.full(n, 2.0 ** -L)
    if alpha != 0:
        weight = centers**alpha * 2.0 ** -L
    return SpaceDescriptor(weight=weight, coords=centers, metric="l2")


def gen_grid_torus(dim: int, n: int) -> SpaceDescriptor:
    """``n**dim`` grid points on the unit torus with the wrap-around sup distance."""
    if dim not in (1, 2, 3) or not (isinstance(n, (int, np.integer)) and n >= 1):
        raise SizeOutOfRange(f"need dim in 1..3 and n >= 1, got dim={dim}, n={n}")
    if n**dim > 1 << 20:
        raise SizeOutOfRange(f"n**dim = {n**dim} exceeds 2**20")
    axes = np.meshgrid(*([np.arange(n) / n] * dim), indexing="ij")
    coords = np.stack([a.ravel() for a in axes], axis=1)
    weight = np.full(n**dim, float(n) ** -dim)
    return SpaceDescriptor(weight=weight, coords=coords, metric="circle")


# -- file format -------------------------------------------------------------

def save_space(space: SpaceDescriptor, path):
    lines = [f"space v1 n={space.n}"]
    if space.table is None:
        lines.append(f"metric {space.metric}")
    lines += [f"w {i} {float(v)!r}" for i, v in enumerate(space.weight)]
    if space.table is None:
        for i, row in enumerate(space.coords):
            lines.append(f"coords {i} " + " ".join(repr(float(v)) for v in row))
    else:
        t = space.table
        symmetric = bool(np.array_equal(t, t.T))
        for i in range(space.n):
            for j in range(space.n):
                if i != j and (j > i or not symmetric):
                    lines.append(f"d {i} {j} {float(t[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_space(path) -> SpaceDescriptor:
    """Parse a space file; axiom violations surface as the matching error."""
    text = Path(path).read_text()
    n = None
    weights, coords, pairs = {}, {}, {}
    metric = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if n is None:
            if len(tok) != 3 or tok[:2] != ["space", "v1"] or not tok[2].startswith("n="):
                raise ParseError("expected header 'space v1 n=<int>'", lineno)
            try:
                n = int(tok[2][2:])
            except ValueError:
                raise ParseError(f"bad point count {tok[2]!r}", lineno) from None
            if n < 1:
                raise ParseError("a space needs at least one point", lineno)
            continue
        kind = tok[0]
        if kind == "metric":
            if len(tok) != 2 or tok[1] not in METRICS:
                raise ParseError(f"metric must be one of {', '.join(METRICS)}", lineno)
            metric = tok[1]
            continue
        if kind not in ("w", "coords", "d"):
            raise ParseError(f"unknown record {kind!r}", lineno)
        try:
            ids = [int(t) for t in tok[1:3 if kind == "d" else 2]]
            vals = [float(t) for t in tok[3 if kind == "d" else 2:]]
        except ValueError:
            raise ParseError(f"malformed {kind!r} record", lineno) from None
        if any(not 0 <= i < n for i in ids):
            raise ParseError(f"point id out of range 0..{n - 1}", lineno)
        if any(not math.isfinite(v) for v in vals):
            raise ParseError("values must be finite", lineno)
        if kind == "w":
            if len(vals) != 1:
                raise ParseError("expected 'w <id> <weight>'", lineno)
            if vals[0] <= 0:
                raise ParseError(f"weight must be positive, got {vals[0]}", lineno)
            if ids[0] in weights:
                raise ParseError(f"duplicate weight for point {ids[0]}", lineno)
            weights[ids[0]] = vals[0]
        elif kind == "coords":
            if not 1 <= len(vals) <= 3:
                raise ParseError("expected 1 to 3 coordinates", lineno)
            if ids[0] in coords:
                raise ParseError(f"duplicate coordinates for point {ids[0]}", lineno)
            coords[ids[0]] = vals
        else:
            if len(vals) != 1:
                raise ParseError("expected 'd <i> <j> <value>'", lineno)
            if (ids[0], ids[1]) in pairs:
                raise ParseError(f"duplicate distance for ({ids[0]}, {ids[1]})", lineno)
            pairs[ids[0], ids[1]] = vals[0]
    if n is None:
        raise ParseError("missing header", 1)
    if len(weights) != n:
        raise ParseError(f"expected {n} weights, found {len(weights)}")
    weight = np.array([weights[i] for i in range(n)])
    if coords and pairs:
        raise ParseError("a file gives either coords or d records, not both")
    if coords:
        if metric is None:
            raise ParseError("coords require a 'metric' record")
        if len(coords) != n:
            raise ParseError(f"expected {n} coordinate records, found {len(coords)}")
        dims = {len(v) for v in coords.values()}
        if len(dims) != 1:
            raise ParseError("all points need the same number of coordinates")
        c = np.array([coords[i] for i in range(n)])
        return SpaceDescriptor(weight=weight, coords=c, metric=metric)
    table = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if (i, j) in pairs:
                table[i, j] = pairs[i, j]
            elif (j, i) in pairs:
                table[i, j] = pairs[j, i]
            elif i != j:
                raise ParseError(f"missing distance between points {i} and {j}")
    verify_quasi_metric(table)
    return SpaceDescriptor(weight=weight, table=table)
