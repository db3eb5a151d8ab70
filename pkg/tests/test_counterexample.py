import math

import numpy as np
import pytest

from maxblow.counterexample import (
    SweepResult,
    annulus_decomposition,
    blowup_report,
    build_witness,
    find_density_point,
    find_interior_point,
    finite_theory_bound,
    growth_verified,
    modular_finite_check,
    pointwise_certificate,
    sublevel_set,
    sweep,
    theory_bound,
)
from maxblow.errors import (
    DegenerateConstants,
    EmptyAnnulusIntersection,
    EmptySublevelSet,
    MaxblowError,
    NoAnnuli,
    NoDensityPoint,
    ReverseDoublingFailure,
    SupportExponentTooLarge,
)
from maxblow.maximal import ball_average, maximal_function
from maxblow.space import (
    RadiusWindow,
    SpaceDescriptor,
    doubling_certificate,
    gen_dyadic_interval,
    gen_power_weight,
)
from maxblow.varlp import ExponentFunction, PointFunction, modular

import oracles

TOL = 1e-10
SLACK = 1e-12


def const_p(v, n):
    return ExponentFunction.constant(v, n)


@pytest.fixture(scope="module")
def dyadic12():
    sp = gen_dyadic_interval(12)
    win = RadiusWindow.dyadic(2.0**-10, 0.5)
    return sp, win, doubling_certificate(sp, win)


@pytest.fixture(scope="module")
def sweep12(dyadic12):
    sp, win, cert = dyadic12
    return sweep(sp, const_p(1, sp.n), (1, 2, 4, 8), cert, win, TOL)


# -- sublevel sets ---------------------------------------------------------------

def test_sublevel_set_examples():
    assert sublevel_set(const_p(1, 5), 7) == frozenset(range(5))
    assert sublevel_set(ExponentFunction(np.array([1.0, 1.4, 2.0])), 3) == {0}
    assert sublevel_set(const_p(2, 4), 1) == frozenset()
    # strict comparison at the threshold itself
    assert sublevel_set(ExponentFunction(np.array([1.5, 1.25])), 2) == {1}
    with pytest.raises(MaxblowError):
        sublevel_set(const_p(1, 3), 0)


# -- density points --------------------------------------------------------------

def test_full_set_gives_top_radius():
    for sp in (gen_dyadic_interval(6), gen_power_weight(6, 1.0)):
        win = RadiusWindow.for_space(sp)
        cert = doubling_certificate(sp, win)
        dp = find_density_point(sp, frozenset(range(sp.n)), cert, win)
        assert dp.radius == max(r for r in win.grid if r < 1)
        assert dp.min_density == 1.0


def test_left_half_density_point_l8():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    threshold = (1 + cert.delta_const) / 2
    E = frozenset(range(128))
    x = sp.coords[:, 0]
    radii = [oracles.admissible_radius(x, sp.weight, E, c, win.grid, win.r_min, threshold)
             for c in range(sp.n)]
    # the cell nearest 1/4 keeps dense balls up to radius 1/4
    assert radii[64] == 0.25
    dp = find_density_point(sp, E, cert, win)
    assert dp.point in E
    assert dp.radius == max(radii)
    assert radii[dp.point] == dp.radius
    assert dp.min_density > threshold


def test_min_density_matches_direct_scan():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    E = frozenset(range(128))
    dp = find_density_point(sp, E, cert, win)
    x = sp.coords[:, 0]
    checked = [r for r in win.grid if r <= dp.radius]
    r = dp.radius / 2
    while r >= win.r_min:
        checked.append(r)
        r /= 2
    inE = np.zeros(sp.n, dtype=bool)
    inE[list(E)] = True
    dens = []
    for r in checked:
        m = oracles.ball_mask(x, dp.point, r)
        dens.append(math.fsum(sp.weight[m & inE]) / math.fsum(sp.weight[m]))
    assert dp.min_density == pytest.approx(min(dens), rel=1e-14)


def test_singleton_is_not_dense():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.dyadic(2.0**-6, 0.5)
    cert = doubling_certificate(sp, win)
    for c in (0, 100, 255):
        with pytest.raises(NoDensityPoint):
            find_density_point(sp, frozenset({c}), cert, win)
    with pytest.raises(NoDensityPoint):
        find_density_point(sp, frozenset(), cert, win)


def test_density_point_refuses_reverse_doubling_failure():
    sp = SpaceDescriptor(weight=np.ones(1), coords=np.zeros(1), metric="l2")
    win = RadiusWindow.dyadic(0.25, 0.5)
    cert = doubling_certificate(sp, win)
    assert cert.reverse_doubling_fails
    with pytest.raises(ReverseDoublingFailure):
        find_density_point(sp, frozenset({0}), cert, win)


def test_interior_point_ball_inside_set():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.for_space(sp)
    E = frozenset(range(128))
    dp = find_interior_point(sp, E, win)
    assert dp.min_density == 1.0
    members = np.flatnonzero(oracles.ball_mask(sp.coords[:, 0], dp.point, dp.radius))
    assert set(members.tolist()) <= E
    # the first cell's half-width ball stops just short of cell 128
    assert (dp.point, dp.radius) == (0, 0.5)


# -- annuli ----------------------------------------------------------------------

def test_annulus_example_l10():
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.dyadic(2.0**-9, 0.5)
    dec = annulus_decomposition(sp, 512, 0.25, win)
    assert dec.J == 7
    assert [len(a) for a in dec.annuli] == [256, 128, 64, 32, 16, 8, 4]
    assert dec.radii == tuple(0.25 / 2**i for i in range(8))
    check_decomposition(sp, dec, win)


def check_decomposition(sp, dec, win):
    union = set(dec.core)
    for i, ann in enumerate(dec.annuli):
        assert ann
        assert not (ann & union)
        union |= ann
        assert dec.balls[i + 1] < dec.balls[i]
    assert union == set(dec.balls[0])
    assert all(r >= win.r_min for r in dec.radii)


def test_annuli_partition_random_centers():
    rng = np.random.default_rng(8)
    for alpha in (0.0, 0.5, 2.0):
        sp = gen_power_weight(9, alpha)
        win = RadiusWindow.for_space(sp)
        for _ in range(10):
            c = int(rng.integers(sp.n))
            R = float(rng.choice([r for r in win.grid if r > win.r_min]))
            check_decomposition(sp, annulus_decomposition(sp, c, R, win), win)


def test_two_point_space_has_no_annuli():
    sp = SpaceDescriptor(weight=np.ones(2), coords=np.array([0.0, 1.0]), metric="l2")
    # the halved ball equals the ball (both singletons, or both the whole space)
    for win in (RadiusWindow.dyadic(0.25, 0.5), RadiusWindow.dyadic(0.5, 1.0), RadiusWindow.dyadic(2.0, 4.0)):
        with pytest.raises(NoAnnuli):
            annulus_decomposition(sp, 0, win.r_max, win)
    # a window straddling the gap splits off the other point as one annulus
    dec = annulus_decomposition(sp, 0, 2.0, RadiusWindow.dyadic(1.0, 2.0))
    assert dec.J == 1 and dec.annuli[0] == {1} and dec.core == {0}


def test_radius_outside_window():
    sp = gen_dyadic_interval(6)
    with pytest.raises(NoAnnuli):
        annulus_decomposition(sp, 0, 0.75, RadiusWindow.dyadic(2.0**-4, 0.5))


# -- witnesses -------------------------------------------------------------------

def two_annulus_space():
    # point 0 alone at the center, annulus 1 = {1}, annulus 0 = {2}
    sp = SpaceDescriptor(weight=np.array([0.25, 0.25, 0.5]), coords=np.array([0.0, 0.3, 0.6]),
                         metric="l2")
    win = RadiusWindow.dyadic(0.25, 1.0)
    return sp, annulus_decomposition(sp, 0, 1.0, win)


def test_witness_example():
    sp, dec = two_annulus_space()
    assert [sorted(a) for a in dec.annuli] == [[2], [1]]
    wit = build_witness(sp, dec, range(3), 2.0, 1)
    assert wit.values.values.tolist() == [0.0, 2.0, 2.0]
    assert wit.support_set == {0, 1, 2}


def test_witness_large_k_limit():
    sp, dec = two_annulus_space()
    wit = build_witness(sp, dec, range(3), 2.0, 10**9)
    assert wit.values.values[1] == pytest.approx(1 / 0.25, rel=1e-8)
    assert wit.values.values[2] == 1 / 0.5


def test_witness_closed_form_and_modes():
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.for_space(sp)
    dec = annulus_decomposition(sp, 300, 0.25, win)
    rng = np.random.default_rng(3)
    E = frozenset(np.flatnonzero(rng.random(sp.n) < 0.8).tolist())
    for k in (1, 3):
        wit = build_witness(sp, dec, E, 2.5, k)
        want = oracles.witness_closed_form(sp.weight, dec.annuli, E, 2.5, k)
        assert np.allclose(wit.values.values, want, rtol=1e-14, atol=0)
        assert np.all(wit.values.values[sorted(dec.core)] == 0)
    full = build_witness(sp, dec, range(sp.n), 2.5, 2, "density")
    usc = build_witness(sp, dec, dec.balls[0], 2.5, 2, "usc")
    assert np.array_equal(full.values.values, usc.values.values)
    assert usc.support_set == dec.balls[0]


def test_witness_errors():
    sp, dec = two_annulus_space()
    with pytest.raises(EmptyAnnulusIntersection):
        build_witness(sp, dec, {0, 1}, 2.0, 1)
    with pytest.raises(DegenerateConstants):
        build_witness(sp, dec, range(3), 1.0, 1)
    with pytest.raises(MaxblowError):
        build_witness(sp, dec, range(3), 2.0, 1, "other")


# -- modular check ---------------------------------------------------------------

def test_modular_single_annulus():
    sp = SpaceDescriptor(weight=np.array([0.5, 0.5]), coords=np.array([0.0, 1.0]), metric="l2")
    dec = annulus_decomposition(sp, 0, 2.0, RadiusWindow.dyadic(1.0, 2.0))
    assert dec.J == 1 and dec.annuli[0] == {1}
    sp1 = SpaceDescriptor(weight=np.array([1.0, 1.0]), coords=np.array([0.0, 1.0]), metric="l2")
    wit = build_witness(sp1, dec, {0, 1}, 2.0, 1)
    value, _ = modular_finite_check(sp1, const_p(1, 2), wit, 0.5)
    assert value == 1.0


def test_modular_p1_closed_form():
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    dec = annulus_decomposition(sp, 512, 0.25, win)
    rng = np.random.default_rng(5)
    E = frozenset(np.flatnonzero(rng.random(sp.n) < 0.9).tolist())
    for k in (1, 2, 4):
        wit = build_witness(sp, dec, E, cert.a_const, k)
        value, _ = modular_finite_check(sp, const_p(1, sp.n), wit, cert.delta_const)
        want = math.fsum(sp.mass(a & E) / (cert.a_const ** (i / k) * sp.mass(a))
                         for i, a in enumerate(dec.annuli))
        assert value == pytest.approx(want, rel=1e-13)
        assert value <= math.fsum(cert.a_const ** (-i / k) for i in range(dec.J)) * (1 + SLACK)


@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_modular_bound_l12(dyadic12, k):
    sp, win, cert = dyadic12
    p = const_p(1 + 1 / (2 * k), sp.n)
    E = sublevel_set(p, k)
    dp = find_density_point(sp, E, cert, win)
    dec = annulus_decomposition(sp, dp.point, dp.radius, win)
    wit = build_witness(sp, dec, E, cert.a_const, k)
    value, bound = modular_finite_check(sp, p, wit, cert.delta_const)
    assert value == pytest.approx(modular(sp, p, wit.values), rel=0)
    assert 0 < value <= bound


def test_modular_refuses_large_exponent():
    sp, dec = two_annulus_space()
    wit = build_witness(sp, dec, range(3), 2.0, 2)
    with pytest.raises(SupportExponentTooLarge):
        modular_finite_check(sp, ExponentFunction(np.array([1.0, 1.0, 1.5])), wit, 0.5)


# -- inequalities behind the construction ------------------------------------------

@pytest.fixture(scope="module")
def witnesses10():
    """Valid density-mode witnesses on dyadic L=10 for several sets and k."""
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    rng = np.random.default_rng(10)
    sets = [frozenset(range(sp.n)), frozenset(range(sp.n // 2)),
            frozenset(np.flatnonzero(rng.random(sp.n) < 0.97).tolist())]
    out = []
    for E in sets:
        dp = find_density_point(sp, E, cert, win)
        dec = annulus_decomposition(sp, dp.point, dp.radius, win)
        for k in (1, 2, 5):
            out.append((E, build_witness(sp, dec, E, cert.a_const, k)))
    return sp, cert, out


def test_annulus_mass_bounds(witnesses10):
    sp, cert, wits = witnesses10
    a, delta = cert.a_const, cert.delta_const
    for _, wit in wits:
        dec = wit.decomposition
        mu0 = sp.mass(dec.balls[0])
        for i, ann in enumerate(dec.annuli):
            mui = sp.mass(dec.balls[i])
            assert sp.mass(ann) >= (1 - delta) * mui - SLACK
            assert mui >= a ** (-i) * mu0 - SLACK


def test_annulus_density_estimate(witnesses10):
    sp, cert, wits = witnesses10
    for E, wit in wits:
        for ann in wit.decomposition.annuli:
            assert sp.mass(ann & E) >= (1 - cert.delta_const) / 2 * sp.mass(ann) - SLACK


def test_pointwise_chain(witnesses10):
    sp, cert, wits = witnesses10
    for E, wit in wits:
        dec, k = wit.decomposition, wit.k
        g = pointwise_certificate(sp, wit).values
        mf = maximal_function(sp, wit.values).values
        assert np.all(g <= mf)
        terms = [sp.mass(a & E) / (cert.a_const ** (j / k) * sp.mass(a)) for j, a in enumerate(dec.annuli)]
        for i, ann in enumerate(dec.annuli):
            want = math.fsum(terms[i:]) / sp.mass(dec.balls[i])
            for x in ann & E:
                assert g[x] == pytest.approx(want, rel=SLACK)
        off = np.ones(sp.n, dtype=bool)
        off[list(wit.support_set - dec.core)] = False
        assert np.all(g[off] == 0)


def test_certificate_examples():
    sp = SpaceDescriptor(weight=np.array([0.5, 0.5]), coords=np.array([0.0, 1.0]), metric="l2")
    dec = annulus_decomposition(sp, 0, 2.0, RadiusWindow.dyadic(1.0, 2.0))
    wit = build_witness(sp, dec, {0, 1}, 2.0, 1)
    # only point 1 lies in an annulus; the core point 0 carries no mass
    assert wit.values.values.tolist() == [0.0, 2.0]
    assert pointwise_certificate(sp, wit).values.tolist() == [0.0, ball_average(sp, {0, 1}, wit.values)]


def test_pointwise_lower_bound_l10_k2():
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    E = sublevel_set(const_p(1, sp.n), 2)
    dp = find_density_point(sp, E, cert, win)
    dec = annulus_decomposition(sp, dp.point, dp.radius, win)
    wit = build_witness(sp, dec, E, cert.a_const, 2)
    g = pointwise_certificate(sp, wit).values
    f = wit.values.values
    supp = sorted(wit.support_set - dec.core)
    assert np.all(g[supp] >= f[supp] * (1 - cert.delta_const) ** 2 / 2)


# -- bounds ----------------------------------------------------------------------

def test_theory_bound_examples():
    assert theory_bound(2, 0.5, 1) == 0.25
    assert theory_bound(2, 0.5, 8) == pytest.approx(0.25 / (2 * (1 - 2 ** (-1 / 8))), rel=1e-15)
    # 2**(-1/8) = 0.917004..., so the value is 0.125 / 0.082996... = 1.50610
    assert theory_bound(2, 0.5, 8) == pytest.approx(1.50610, abs=5e-6)
    assert theory_bound(2, 0.5, 8) / theory_bound(2, 0.5, 1) > 6
    assert finite_theory_bound(2, 0.5, 1, 1) == 0.125
    assert finite_theory_bound(2, 0.5, 3, 4000) == pytest.approx(theory_bound(2, 0.5, 3), rel=1e-12)
    vals = [finite_theory_bound(2.3, 0.6, 4, t) for t in range(1, 30)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < theory_bound(2.3, 0.6, 4)


@pytest.mark.parametrize("args", [(1.0, 0.5, 1), (2, 0.0, 1), (2, 1.0, 1), (2, 0.5, 0)])
def test_degenerate_constants(args):
    with pytest.raises(DegenerateConstants):
        theory_bound(*args)
    with pytest.raises(DegenerateConstants):
        finite_theory_bound(*args, 3)
    with pytest.raises(DegenerateConstants):
        finite_theory_bound(2, 0.5, 1, 0)


# -- reports and sweeps -----------------------------------------------------------

def test_sweep12_reports(sweep12, dyadic12):
    _, _, cert = dyadic12
    assert [r.k for r in sweep12.rows] == [1, 2, 4, 8]
    for r in sweep12.rows:
        assert r.ratio >= r.certified_ratio - 10 * TOL
        assert r.certified_ratio >= finite_theory_bound(cert.a_const, cert.delta_const, r.k, r.J) * (1 - 10 * TOL)
        assert r.modular_fk <= r.modular_bound
        assert r.norm_fk > 0 and r.norm_Mfk > 0
        assert math.isfinite(r.modular_fk)
        assert np.all(r.certificate.values <= r.maximal_values)
    ratios = [r.ratio for r in sweep12.rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] >= 2 * ratios[0]
    assert sweep12.growth_verified


def test_record_and_csv(sweep12):
    rec = sweep12.rows[0].record()
    keys = [line.split("=", 1)[0] for line in rec.strip().split("\n")]
    assert keys[:4] == ["k", "mode", "density_point", "J"]
    for name in ("modular_fk", "norm_fk", "norm_Mfk", "ratio", "certified_ratio",
                 "theory_bound", "finite_theory_bound"):
        assert name in keys
    lines = sweep12.csv().strip().split("\n")
    assert lines[0] == SweepResult.CSV_HEADER
    assert [int(line.split(",")[0]) for line in lines[1:]] == [1, 2, 4, 8]


def test_scaling_invariance_constant_p():
    base = gen_dyadic_interval(9)
    win = RadiusWindow.for_space(base)
    for c in (3.0, 0.01):
        scaled = SpaceDescriptor(weight=base.weight * c, coords=base.coords, metric="l2")
        for pv in (1.0, 1.2):
            p = const_p(pv, base.n)
            for k in (1, 4):
                a = blowup_report(base, p, k, doubling_certificate(base, win), win, TOL)
                b = blowup_report(scaled, p, k, doubling_certificate(scaled, win), win, TOL)
                assert b.ratio == pytest.approx(a.ratio, abs=10 * TOL * a.ratio)
                assert b.certified_ratio == pytest.approx(a.certified_ratio, abs=10 * TOL * a.ratio)
                assert b.theory_bound == pytest.approx(a.theory_bound, rel=1e-12)


def test_usc_mode_support_is_the_ball():
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    x = sp.coords[:, 0]
    p = ExponentFunction(np.where(x < 0.5, 1.0, 2.0))
    rep = blowup_report(sp, p, 2, cert, win, TOL, "usc")
    ball0 = rep.witness.decomposition.balls[0]
    assert rep.witness.support_set == ball0
    assert all(x[i] < 0.5 for i in ball0)
    assert rep.ratio >= rep.certified_ratio - 10 * TOL
    # the support sits where p < 1 + 1/k, so the modular chain applies
    assert rep.modular_fk <= rep.modular_bound


def test_pipeline_errors():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.for_space(sp)
    cert = doubling_certificate(sp, win)
    with pytest.raises(EmptySublevelSet):
        blowup_report(sp, const_p(2, sp.n), 1, cert, win)
    with pytest.raises(MaxblowError):
        blowup_report(sp, const_p(1, sp.n), 1, cert, win, mode="other")
    # p_- = 1.5: E_k is empty as soon as 1 + 1/k <= 1.5
    p = const_p(1.5, sp.n)
    with pytest.raises(EmptySublevelSet):
        sweep(sp, p, (2, 4), cert, win)
    for bad in ((), (2, 1), (1, 1)):
        with pytest.raises(MaxblowError):
            sweep(sp, const_p(1, sp.n), bad, cert, win)


def test_single_k_is_vacuous():
    sp = gen_dyadic_interval(8)
    win = RadiusWindow.for_space(sp)
    res = sweep(sp, const_p(1, sp.n), (1,), doubling_certificate(sp, win), win)
    assert res.growth_verified
    assert growth_verified(res.rows)
