"""Witness functions whose maximal-to-original norm ratio blows up as ``p_- -> 1``.

Pipeline for one ``k``:

1. ``E_k = {p < 1 + 1/k}``;
2. a center ``x_k`` and radius ``R_k`` where ``E_k`` fills every window ball
   beyond the reverse doubling threshold ``(1 + delta) / 2``;
3. dyadic balls ``B^i = B(x_k, R_k / 2**i)`` down to the window resolution and
   the annuli between them;
4. ``f_k = 1 / (A**(i/k) * mu(annulus_i))`` on ``annulus_i`` intersected with
   ``E_k``, zero elsewhere (including the innermost core ball);
5. the norm of ``M f_k`` against the norm of ``f_k``, plus the pointwise
   lower bound ``g`` obtained by averaging ``f_k`` over ``B^i``.

In ``usc`` mode (upper semicontinuous exponents) step 2 asks for a whole
ball inside ``E_k`` and step 4 uses the ball itself as support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import (
    DegenerateConstants,
    EmptyAnnulusIntersection,
    EmptySublevelSet,
    MaxblowError,
    NoAnnuli,
    NoDensityPoint,
    ReverseDoublingFailure,
    SupportExponentTooLarge,
)
from .maximal import ball_average, maximal
from .space import BallMasses, DoublingCertificate, RadiusWindow, SpaceDescriptor, open_ball
from .varlp import DEFAULT_TOL, ExponentFunction, PointFunction, luxemburg_norm, modular

MODES = ("density", "usc")


@dataclass(frozen=True)
class DensityPoint:
    point: int
    radius: float
    min_density: float


@dataclass(frozen=True)
class AnnulusDecomposition:
    center: int
    radii: tuple
    balls: tuple
    annuli: tuple

    @property
    def J(self):
        return len(self.annuli)

    @property
    def core(self):
        return self.balls[-1]


@dataclass(frozen=True, eq=False)
class WitnessFunction:
    values: PointFunction
    k: int
    a_used: float
    decomposition: AnnulusDecomposition
    mode: str
    support_set: frozenset


@dataclass(frozen=True, eq=False)
class BlowupReport:
    k: int
    mode: str
    density_point: DensityPoint
    J: int
    modular_fk: float
    modular_bound: float
    norm_fk: float
    norm_Mfk: float
    ratio: float
    certified_ratio: float
    theory_bound: float
    finite_theory_bound: float
    witness: WitnessFunction = field(repr=False)
    certificate: PointFunction = field(repr=False)
    maximal_values: np.ndarray = field(repr=False)

    def record(self):
        """One ``key=value`` per line."""
        out = []
        for fld in fields(self):
            if not fld.repr:
                continue
            v = getattr(self, fld.name)
            if isinstance(v, DensityPoint):
                v = f"{v.point} {v.radius:.12g} {v.min_density:.12g}"
            elif isinstance(v, float):
                v = f"{v:.12g}"
            out.append(f"{fld.name}={v}")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    growth_verified: bool

    CSV_HEADER = "k,J,modular,norm_f,norm_Mf,ratio,certified_ratio,theory_bound,finite_theory_bound"

    def csv(self):
        lines = [self.CSV_HEADER]
        for r in self.rows:
            nums = (r.modular_fk, r.norm_fk, r.norm_Mfk, r.ratio, r.certified_ratio,
                    r.theory_bound, r.finite_theory_bound)
            lines.append(f"{r.k},{r.J}," + ",".join(f"{v:.12g}" for v in nums))
        return "\n".join(lines) + "\n"


def _mask(space, E):
    m = np.zeros(space.n, dtype=bool)
    if len(E):
        m[np.fromiter(E, dtype=np.int64)] = True
    return m


# -- construction steps -------------------------------------------------------

def sublevel_set(p: ExponentFunction, k: int) -> frozenset:
    """``{x : p(x) < 1 + 1/k}``."""
    if k < 1:
        raise MaxblowError(f"k must be >= 1, got {k}")
    return frozenset(np.flatnonzero(p.values < 1 + 1 / k).tolist())


def _admissible_radii(window: RadiusWindow):
    grid = [r for r in window.grid if r < 1]
    checked = set(grid)
    for g in grid:
        r = g / 2
        while r >= window.r_min:
            checked.add(r)
            r /= 2
    return grid, sorted(checked)


def _search_center(space, E, window, accept):
    """Center maximizing the admissible radius; ``accept(density)`` per radius.

    A grid radius ``R`` is admissible for ``x`` when every grid radius up to
    ``R`` and every halving ``R / 2**i`` down to ``r_min`` passes. Among equal
    radii the ball of largest measure wins, then the smallest point id.
    """
    if not E:
        raise NoDensityPoint("the set is empty")
    grid, radii = _admissible_radii(window)
    if not grid:
        raise NoDensityPoint("no window radius below 1")
    pos = {r: j for j, r in enumerate(radii)}
    cand = np.array(sorted(E), dtype=np.int64)
    masses = BallMasses(space).profiles(cand, radii)
    dens = BallMasses(space, space.weight * _mask(space, E)).profiles(cand, radii) / masses
    ok = accept(dens)
    # valid[:, j]: grid radius j passes, with all smaller grid radii and all its halvings
    valid = np.empty((cand.size, len(grid)), dtype=bool)
    low = np.empty((cand.size, len(grid)))
    prefix_ok = np.ones(cand.size, dtype=bool)
    prefix_min = np.full(cand.size, np.inf)
    for j, g in enumerate(grid):
        prefix_ok &= ok[:, pos[g]]
        prefix_min = np.minimum(prefix_min, dens[:, pos[g]])
        halves = []
        r = g / 2
        while r >= window.r_min:
            halves.append(pos[r])
            r /= 2
        valid[:, j] = prefix_ok & ok[:, halves].all(axis=1)
        low[:, j] = np.minimum(prefix_min, dens[:, halves].min(axis=1, initial=np.inf))
    has = valid.any(axis=1)
    if not has.any():
        raise NoDensityPoint("no point of the set is dense enough at any window radius")
    jbest = len(grid) - 1 - np.argmax(valid[:, ::-1], axis=1)
    rows = np.flatnonzero(has)
    R = np.asarray(grid)[jbest[rows]]
    mass = masses[rows, [pos[grid[j]] for j in jbest[rows]]]
    # larger radius first, then the heavier (less boundary-clipped) ball, then smaller id
    pick = rows[np.lexsort((cand[rows], -mass, -R))[0]]
    j = jbest[pick]
    return DensityPoint(int(cand[pick]), float(grid[j]), float(low[pick, j]))


def find_density_point(space: SpaceDescriptor, E, cert: DoublingCertificate,
                       window: RadiusWindow | None = None) -> DensityPoint:
    """Point of ``E`` whose balls keep ``mu(E & B) / mu(B) > (1 + delta) / 2`` the longest."""
    if cert.reverse_doubling_fails:
        raise ReverseDoublingFailure(f"delta = {cert.delta_const} >= 1 on the window")
    threshold = (1 + cert.delta_const) / 2
    return _search_center(space, E, window or cert.window, lambda d: d > threshold)


def find_interior_point(space: SpaceDescriptor, E, window: RadiusWindow) -> DensityPoint:
    """Point of ``E`` with the largest window ball contained in ``E``."""
    return _search_center(space, E, window, lambda d: d == 1.0)


def annulus_decomposition(space: SpaceDescriptor, x_k: int, R_k: float,
                          window: RadiusWindow) -> AnnulusDecomposition:
    if not window.r_min <= R_k <= window.r_max:
        raise NoAnnuli(f"radius {R_k} lies outside the window [{window.r_min}, {window.r_max}]")
    radii = [float(R_k)]
    balls = [open_ball(space, x_k, R_k).members]
    annuli = []
    r = R_k / 2
    while r >= window.r_min:
        b = open_ball(space, x_k, r).members
        ann = balls[-1] - b
        if not ann:
            break
        radii.append(r)
        balls.append(b)
        annuli.append(ann)
        r /= 2
    if not annuli:
        raise NoAnnuli(f"no nonempty annulus around point {x_k} between {R_k} and {window.r_min}")
    return AnnulusDecomposition(int(x_k), tuple(radii), tuple(balls), tuple(annuli))


def build_witness(space: SpaceDescriptor, decomposition: AnnulusDecomposition, E,
                  a_used: float, k: int, mode: str = "density") -> WitnessFunction:
    if mode not in MODES:
        raise MaxblowError(f"mode must be one of {MODES}, got {mode!r}")
    if not a_used > 1:
        raise DegenerateConstants(f"doubling constant must exceed 1, got {a_used}")
    if k < 1:
        raise MaxblowError(f"k must be >= 1, got {k}")
    E = frozenset(E)
    ball0 = decomposition.balls[0]
    support = ball0 & E if mode == "density" else ball0
    values = np.zeros(space.n)
    for i, ann in enumerate(decomposition.annuli):
        hit = ann & support
        if not hit:
            raise EmptyAnnulusIntersection(f"annulus {i} around {decomposition.center} misses E")
        level = 1.0 / (a_used ** (i / k) * space.mass(ann))
        values[np.fromiter(hit, dtype=np.int64)] = level
    return WitnessFunction(PointFunction(values), int(k), float(a_used), decomposition, mode,
                           frozenset(support))


def modular_finite_check(space: SpaceDescriptor, p: ExponentFunction, witness: WitnessFunction,
                         delta: float):
    """``(modular of f_k, the bound the modular chain guarantees)``."""
    k = witness.k
    supp = np.fromiter(witness.support_set, dtype=np.int64)
    if supp.size and np.any(p.values[supp] >= 1 + 1 / k):
        raise SupportExponentTooLarge(f"p >= 1 + 1/{k} somewhere on the support")
    value = modular(space, p, witness.values)
    a = witness.a_used
    mu0 = space.mass(witness.decomposition.balls[0])
    q = a ** (-1.0 / k**2)
    series = math.fsum(q**i for i in range(witness.decomposition.J + 1))
    bound = mu0 + ((1 - delta) * mu0) ** (-1.0 / k) * series
    return value, bound


def pointwise_certificate(space: SpaceDescriptor, witness: WitnessFunction) -> PointFunction:
    """Average of ``f_k`` over ``B^i`` at support points of annulus ``i``; zero elsewhere."""
    g = np.zeros(space.n)
    dec = witness.decomposition
    for i, ann in enumerate(dec.annuli):
        hit = ann & witness.support_set
        if hit:
            g[np.fromiter(hit, dtype=np.int64)] = ball_average(space, dec.balls[i], witness.values)
    return PointFunction(g)


def _check_constants(a, delta, k):
    if not (a > 1 and 0 < delta < 1 and k >= 1):
        raise DegenerateConstants(f"need a > 1, 0 < delta < 1, k >= 1; got a={a}, delta={delta}, k={k}")


def theory_bound(a: float, delta: float, k: int) -> float:
    """``(1 - delta)**2 / (2 (1 - a**(-1/k)))``."""
    _check_constants(a, delta, k)
    return (1 - delta) ** 2 / (2 * (1 - a ** (-1.0 / k)))


def finite_theory_bound(a: float, delta: float, k: int, terms: int) -> float:
    """The same bound with the geometric series cut after ``terms`` terms."""
    _check_constants(a, delta, k)
    if terms < 1:
        raise DegenerateConstants(f"need at least one term, got {terms}")
    return (1 - delta) ** 2 / 2 * math.fsum(a ** (-m / k) for m in range(terms))


# -- orchestration ------------------------------------------------------------

def blowup_report(space: SpaceDescriptor, p: ExponentFunction, k: int, cert: DoublingCertificate,
                  window: RadiusWindow | None = None, tol: float = DEFAULT_TOL,
                  mode: str = "density") -> BlowupReport:
    if mode not in MODES:
        raise MaxblowError(f"mode must be one of {MODES}, got {mode!r}")
    window = window or cert.window
    if cert.reverse_doubling_fails:
        raise ReverseDoublingFailure(f"delta = {cert.delta_const} >= 1 on the window")
    E = sublevel_set(p, k)
    if not E:
        raise EmptySublevelSet(f"no point has p < 1 + 1/{k}")
    if mode == "density":
        dp = find_density_point(space, E, cert, window)
    else:
        dp = find_interior_point(space, E, window)
    dec = annulus_decomposition(space, dp.point, dp.radius, window)
    wit = build_witness(space, dec, E, cert.a_const, k, mode)
    mod, bound = modular_finite_check(space, p, wit, cert.delta_const)
    g = pointwise_certificate(space, wit)
    mf = maximal(space, wit.values)
    norm_f = luxemburg_norm(space, p, wit.values, tol).value
    norm_mf = luxemburg_norm(space, p, mf.values, tol).value
    norm_g = luxemburg_norm(space, p, g, tol).value
    return BlowupReport(
        k=int(k),
        mode=mode,
        density_point=dp,
        J=dec.J,
        modular_fk=mod,
        modular_bound=bound,
        norm_fk=norm_f,
        norm_Mfk=norm_mf,
        ratio=norm_mf / norm_f,
        certified_ratio=norm_g / norm_f,
        theory_bound=theory_bound(cert.a_const, cert.delta_const, k),
        finite_theory_bound=finite_theory_bound(cert.a_const, cert.delta_const, k, dec.J),
        witness=wit,
        certificate=g,
        maximal_values=mf.values,
    )


def growth_verified(rows) -> bool:
    """Conservative divergence witness between the smallest and largest ``k``."""
    lo, hi = rows[0], rows[-1]
    if hi.theory_bound >= 4 * lo.theory_bound:
        return hi.ratio >= 2 * lo.ratio
    return True


def sweep(space: SpaceDescriptor, p: ExponentFunction, k_list, cert: DoublingCertificate,
          window: RadiusWindow | None = None, tol: float = DEFAULT_TOL,
          mode: str = "density") -> SweepResult:
    ks = [int(k) for k in k_list]
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise MaxblowError(f"k list must be nonempty and strictly ascending, got {ks}")
    rows = tuple(blowup_report(space, p, k, cert, window, tol, mode) for k in ks)
    return SweepResult(rows, growth_verified(rows))
