import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soulgeom.metrics import MetricModel, metric_jet
from soulgeom.rigidity import (
    IndeterminateError,
    ScanPlan,
    ambient_gap,
    frame_identities,
    gap_form,
    hessian_on_soul,
    lemma_W_residual,
    min_sectional,
    nullity_section,
    oriented_pair,
    plane_argmin,
    prop1_gap,
    prop_three_residuals,
    quasi_strict_scan,
    sectional_grid_min,
    soul_jets,
    soul_point,
    soul_scalars,
)
from soulgeom.curvature import curvature_at
from soulgeom.metrics import ChartPoint
from soulgeom.transport import geodesic

CHEEGER = MetricModel("cheeger_so3")
PRODUCT = MetricModel("product")
seeds = st.integers(0, 2**32 - 1)


def lift(x2):
    return np.r_[x2, 0.0, 0.0, 0.0]


def lift_normal(e):
    return np.r_[0.0, 0.0, e]


def setup(model, rng):
    pt = soul_point(rng.standard_normal(3))
    soul = soul_jets(model, pt)
    X, Y = oriented_pair(soul.h, rng.standard_normal(2))
    return pt, soul, X, Y


@given(seeds)
def test_soul_scalars(seed):
    pt, soul, X, _ = setup(CHEEGER, np.random.default_rng(seed))
    s = soul_scalars(CHEEGER, pt, X, soul)
    assert s.F == pytest.approx(1.5, abs=1e-8)
    assert s.a == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert s.g0 == pytest.approx(1.5, abs=1e-8)
    assert s.g1 == pytest.approx(3.0, abs=1e-8)
    assert s.gauss == pytest.approx(2.0, abs=1e-8)
    assert abs(s.XF) <= 1e-8 and abs(s.hess_g0) <= 1e-6


@given(seeds)
def test_G_values_and_residuals(seed):
    pt, soul, X, _ = setup(CHEEGER, np.random.default_rng(seed))
    W, U, V, _ = soul.normal_frame(X)
    assert soul.G(X, W, V) == pytest.approx(0.0, abs=1e-6)
    assert soul.G(X, U, V) == pytest.approx(2.5, abs=1e-6)
    res = prop_three_residuals(CHEEGER, pt, X, soul).residuals
    assert res == pytest.approx((2.5, 0.875, 0.0), abs=1e-6)
    ids = frame_identities(CHEEGER, pt, X, soul)
    assert max(abs(v) for v in vars(ids).values()) <= 1e-7


def test_hessian_on_soul(rng):
    pt = soul_point(rng.standard_normal(3))
    z = pt.p[2]
    for model, factor in ((PRODUCT, 1.0), (CHEEGER, 2.0)):
        X, _ = oriented_pair(metric_jet(model, pt, degree=0).value[:2, :2], rng.standard_normal(2))
        assert hessian_on_soul(model, lambda x, y, w: 0 * x + 4.0, pt, X) == pytest.approx(0.0, abs=1e-10)
        assert hessian_on_soul(model, lambda x, y, w: w, pt, X) == pytest.approx(-factor * z, abs=1e-8)


def test_product_gap_and_indeterminate(rng):
    pt, soul, X, Y = setup(PRODUCT, rng)
    e = np.eye(3)
    gap = prop1_gap(PRODUCT, pt, lift(X), lift(Y), lift_normal(e[0]), lift_normal(e[1]), soul)
    assert abs(gap.gap) <= 1e-12 and abs(gap.gap_normal) <= 1e-12
    with pytest.raises(IndeterminateError):
        soul_scalars(PRODUCT, pt, X, soul)


@given(seeds, st.floats(0, 2 * np.pi))
def test_gap_frame_invariance(seed, psi):
    rng = np.random.default_rng(seed)
    pt, soul, X, Y = setup(CHEEGER, rng)
    E1, E2 = np.linalg.qr(rng.standard_normal((3, 2)))[0].T
    base = prop1_gap(CHEEGER, pt, lift(X), lift(Y), lift_normal(E1), lift_normal(E2), soul)
    R1 = np.cos(psi) * E1 + np.sin(psi) * E2
    R2 = -np.sin(psi) * E1 + np.cos(psi) * E2
    for args in ((X, Y, R1, R2), (X, -Y, E1, E2), (X, Y, E2, E1)):
        other = prop1_gap(CHEEGER, pt, *(lift(v) for v in args[:2]), *(lift_normal(v) for v in args[2:]), soul)
        assert other.gap == pytest.approx(base.gap, abs=1e-9)
    assert abs(base.difference) <= 1e-6


@given(seeds)
def test_gap_form_matches_direct_gap(seed):
    rng = np.random.default_rng(seed)
    pt, soul, X, Y = setup(CHEEGER, rng)
    E1, E2 = np.linalg.qr(rng.standard_normal((3, 2)))[0].T
    lhs, rhs = ambient_gap(soul.packet, lift(X), lift(Y), lift_normal(E1), lift_normal(E2))
    n = np.cross(E1, E2)
    assert n @ gap_form(soul.packet, lift(X), lift(Y)) @ n == pytest.approx(rhs - lhs, abs=1e-9)


def test_argmin_against_grid(rng):
    pt, soul, X, Y = setup(CHEEGER, rng)
    n_best, val = plane_argmin(soul, X)
    best = np.inf
    for theta in np.linspace(0, np.pi, 61):
        for phi in np.linspace(0, 2 * np.pi, 120, endpoint=False):
            n = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
            E1 = np.cross(n, np.eye(3)[int(np.argmin(np.abs(n)))])
            E1 /= np.linalg.norm(E1)
            E2 = np.cross(n, E1)
            best = min(best, prop1_gap(CHEEGER, pt, lift(X), lift(Y), lift_normal(E1), lift_normal(E2), soul).gap)
    assert val <= best + 1e-12
    assert best - val <= 1e-3
    W = soul.normal_frame(X)[0]
    # the minimising plane contains W
    assert (n_best @ W) ** 2 <= 1e-3


def test_scan_report_invariants():
    rep = quasi_strict_scan(CHEEGER, ScanPlan(3, 4, 8, seed=2), tolerance=1e-5)
    assert len(rep.records) == 12
    for r in rep.records:
        assert r.gap == r.rhs - r.lhs
        assert rep.minimum <= r.gap
    assert rep.quasi_strict is False and rep.strict_directions == []
    assert rep.minimum >= -1e-5


def test_scan_plan_is_seeded():
    a, b = ScanPlan(4, 3, 8, seed=9), ScanPlan(4, 3, 8, seed=9)
    assert np.array_equal(a.soul_points(), b.soul_points())
    assert np.array_equal(a.normal_directions(), b.normal_directions())


def test_min_sectional_is_sound(rng):
    pt = ChartPoint.from_ambient(rng.standard_normal(3), 0.8 * rng.standard_normal(3))
    res = min_sectional(CHEEGER, pt, seed=4)
    pk = curvature_at(CHEEGER, pt, order=0)
    samples = [pk.sectional(X, Y) for X, Y in rng.standard_normal((1000, 2, 5))]
    assert res.value <= min(samples) + 1e-10
    assert res.value >= -1e-8
    Z = res.plane
    assert np.abs(Z @ pk.metric @ Z.T - np.eye(2)).max() <= 1e-10
    assert abs(sectional_grid_min(CHEEGER, pt, samples=4000, seed=1) - res.value) <= 1e-4
    with pytest.raises(ValueError):
        min_sectional(CHEEGER, pt, restarts=4)


def test_min_sectional_on_soul_block(rng):
    pt = soul_point(rng.standard_normal(3))
    assert min_sectional(CHEEGER, pt, subspace=(0, 1)).value == pytest.approx(2.0, abs=1e-6)
    assert min_sectional(PRODUCT, pt, subspace=(0, 1)).value == pytest.approx(1.0, abs=1e-8)


def test_lemma_W(rng):
    pt = soul_point(rng.standard_normal(3))
    X, _ = oriented_pair(metric_jet(CHEEGER, pt, degree=0).value[:2, :2], rng.standard_normal(2))
    res = lemma_W_residual(CHEEGER, geodesic(CHEEGER, pt, lift(X), np.pi), 7)
    assert res.residual <= 1e-4 and res.cross_check <= 1e-4
    flat = lemma_W_residual(PRODUCT, geodesic(PRODUCT, pt, lift(X), 1.0), 5)
    assert flat.parallel_flag


def test_nullity_section(rng):
    pts = rng.standard_normal((25, 3))
    field = nullity_section(CHEEGER, pts)
    assert not field.indeterminate.any()
    assert np.abs(np.cross(field.W, field.points)).max() <= 1e-6
    assert field.consistency.min() >= 0.0
    assert field.kernel_residual.max() <= 1e-8
    flat = nullity_section(PRODUCT, pts)
    assert flat.all_indeterminate
