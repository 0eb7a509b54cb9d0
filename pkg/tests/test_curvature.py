import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soulgeom.curvature import (
    FrameError,
    curvature_at,
    normal_curvature,
    sectional,
    soul_geometry,
    vertical_formula,
    vertical_plane_curvature,
)
from soulgeom.metrics import ChartPoint, MetricModel
from soulgeom.rigidity import oriented_pair, soul_jets, soul_point
from soulgeom.verification import fibre_expansion_curvature

CHEEGER = MetricModel("cheeger_so3")
PRODUCT = MetricModel("product")
seeds = st.integers(0, 2**32 - 1)


def random_point(rng, vmax=1.5):
    V = rng.standard_normal(3)
    V *= rng.uniform(0, vmax) / np.linalg.norm(V)
    return ChartPoint.from_ambient(rng.standard_normal(3), V)


def lift(x2):
    return np.r_[x2, 0.0, 0.0, 0.0]


def lift_normal(e):
    return np.r_[0.0, 0.0, e]


@given(seeds, st.sampled_from([CHEEGER, PRODUCT, MetricModel("cheeger_so3", 2.0, (0.3,))]))
def test_riemann_symmetries(seed, model):
    pk = curvature_at(model, random_point(np.random.default_rng(seed)), order=1)
    R = pk.riemann
    scale = max(1.0, np.abs(R).max())
    assert np.abs(R + R.transpose(1, 0, 2, 3)).max() <= 1e-9 * scale
    assert np.abs(R + R.transpose(0, 1, 3, 2)).max() <= 1e-9 * scale
    assert np.abs(R - R.transpose(2, 3, 0, 1)).max() <= 1e-9 * scale
    bianchi = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    assert np.abs(bianchi).max() <= 1e-9 * scale
    D = pk.nabla_riemann  # D[e, a, b, c, d]
    second = D + D.transpose(1, 2, 0, 3, 4) + D.transpose(2, 0, 1, 3, 4)
    assert np.abs(second).max() <= 1e-8 * max(1.0, np.abs(D).max())


def test_product_sectional_values(rng):
    pt = random_point(rng)
    pk = curvature_at(PRODUCT, pt, order=0)
    conf = 2.0 / (1.0 + pt.u @ pt.u)
    e = np.eye(5)
    assert pk.sectional(e[0], e[1]) == pytest.approx(1.0, abs=1e-12)
    assert pk.sectional(e[0], e[3]) == pytest.approx(0.0, abs=1e-12)
    assert pk.sectional(e[2], e[4]) == pytest.approx(0.0, abs=1e-12)
    assert conf > 0


def test_sectional_helper_matches_packet(rng):
    pk = curvature_at(CHEEGER, random_point(rng), order=0)
    X, Y = rng.standard_normal((2, 5))
    assert sectional(pk.riemann, pk.metric, X, Y) == pytest.approx(pk.sectional(X, Y))


def test_second_derivative_needs_direction(rng):
    pt = random_point(rng)
    X = rng.standard_normal(5)
    pk = curvature_at(CHEEGER, pt, X=X)
    assert pk.nabla2_riemann is not None
    assert pk.nabla2_along is not None
    assert curvature_at(CHEEGER, pt).nabla2_riemann is None


def test_soul_geometry_values(rng):
    for _ in range(5):
        pt = soul_point(rng.standard_normal(3))
        prod = soul_geometry(PRODUCT, pt)
        assert prod.gauss_curvature == pytest.approx(1.0, abs=1e-12)
        assert prod.second_fundamental_norm <= 1e-10
        ch = soul_geometry(CHEEGER, pt)
        assert ch.gauss_curvature == pytest.approx(2.0, abs=1e-6)
        assert ch.second_fundamental_norm <= 1e-8


def test_soul_geometry_off_soul():
    with pytest.raises(ValueError):
        soul_geometry(CHEEGER, ChartPoint.from_ambient([0, 0, 1.0], [0.1, 0, 0]))


@given(seeds, st.sampled_from([CHEEGER, PRODUCT]))
def test_gauss_equation(seed, model):
    pt = soul_point(np.random.default_rng(seed).standard_normal(3))
    pk = curvature_at(model, pt, order=0)
    X, Y = oriented_pair(pk.metric[:2, :2])
    assert pk.sectional(lift(X), lift(Y)) == pytest.approx(soul_geometry(model, pt).gauss_curvature, abs=1e-7)


def test_normal_curvature_values(rng):
    for _ in range(5):
        p = rng.standard_normal(3)
        pt = soul_point(p)
        pk = curvature_at(CHEEGER, pt, order=0)
        X, Y = (lift(v) for v in oriented_pair(pk.metric[:2, :2]))
        nc = normal_curvature(CHEEGER, pt, X, Y, pk)
        assert nc.norm == pytest.approx(1.5, abs=1e-6)
        assert np.abs(nc.matrix + nc.matrix.T).max() == 0.0
        assert np.linalg.norm(nc.apply(pt.p)) <= 1e-8
        assert np.abs(np.cross(nc.axis, pt.p)).max() <= 1e-8
        flipped = normal_curvature(CHEEGER, pt, Y, X, pk)
        assert np.array_equal(flipped.matrix, -nc.matrix)
        zero = normal_curvature(PRODUCT, pt, *(lift(v) for v in oriented_pair(curvature_at(PRODUCT, pt, order=0).metric[:2, :2])))
        assert np.abs(zero.matrix).max() <= 1e-12


def test_normal_curvature_frame_errors():
    pt = soul_point([0.2, 0.3, 0.9])
    with pytest.raises(FrameError):
        normal_curvature(CHEEGER, pt, np.eye(5)[0], np.eye(5)[1])
    with pytest.raises(FrameError):
        normal_curvature(CHEEGER, pt, np.eye(5)[0], np.eye(5)[2])


def test_vertical_planes_expansion_oracle(rng):
    p = rng.standard_normal(3)
    p /= np.linalg.norm(p)
    R = fibre_expansion_curvature(p)
    U = np.cross(p, [1.0, 0.0, 0.0])
    U /= np.linalg.norm(U)
    V = np.cross(p, U)

    def k(a, b):
        return np.einsum("abcd,a,b,c,d->", R, a, b, b, a)

    assert k(p, V) == pytest.approx(1.5, abs=1e-12)
    assert k(U, V) == pytest.approx(3.0, abs=1e-12)
    pk = curvature_at(CHEEGER, soul_point(p), order=0)
    assert np.abs(pk.riemann[2:, 2:, 2:, 2:] - R).max() <= 1e-10


def test_vertical_formula_and_rotation_symmetry(rng):
    p = rng.standard_normal(3)
    p /= np.linalg.norm(p)
    pt = soul_point(p)
    soul = soul_jets(CHEEGER, pt)
    X, _ = soul.frame()
    W, U, V, _ = soul.normal_frame(X)
    pk = soul.packet
    for theta in np.linspace(0, np.pi / 2, 7):
        base = vertical_plane_curvature(pk, lift_normal(W), lift_normal(U), lift_normal(V), theta)
        assert base == pytest.approx(vertical_formula(theta), abs=1e-6)
        for psi in np.linspace(0, 2 * np.pi, 5):
            # rotate the (U, V) pair about W
            U2 = np.cos(psi) * U + np.sin(psi) * V
            V2 = -np.sin(psi) * U + np.cos(psi) * V
            rot = vertical_plane_curvature(pk, lift_normal(W), lift_normal(U2), lift_normal(V2), theta)
            assert rot == pytest.approx(base, abs=1e-7)


def test_backends_agree(rng):
    for _ in range(4):
        pt = random_point(rng)
        Rj = curvature_at(CHEEGER, pt, order=0).riemann
        Rf = curvature_at(CHEEGER, pt, order=0, backend="fd").riemann
        assert np.abs(Rf - Rj).max() <= 1e-5 * np.abs(Rj).max()


def test_unknown_backend(rng):
    with pytest.raises(ValueError):
        curvature_at(CHEEGER, random_point(rng), backend="symbolic")


def test_sampled_planes_nonnegative(rng):
    worst = np.inf
    for _ in range(10):
        pk = curvature_at(CHEEGER, random_point(rng, 3.0), order=0)
        for X, Y in rng.standard_normal((50, 2, 5)):
            worst = min(worst, pk.sectional(X, Y))
    assert worst >= -1e-8
