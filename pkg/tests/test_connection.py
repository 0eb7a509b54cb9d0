import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soulgeom.connection import (
    BaseMap,
    ConnectionFamily,
    covariant_derivative,
    curvature_closed_form,
    curvature_from_connection,
    curvature_via_loops,
    holonomy_dimension,
    lambda_sweep,
    phi,
    transport_section_deviation,
)
from soulgeom.metrics import MetricModel
from soulgeom.transport import DomainError, SoulNormalBundle, loop_basket, rotation

seeds = st.integers(0, 2**32 - 1)
MAPS = [
    BaseMap(),
    BaseMap("rotation", tuple(map(tuple, rotation([1.0, 2.0, 0.5], 0.7)))),
    BaseMap("dilation", c=1.7),
]


def point_and_pair(rng):
    p = rng.standard_normal(3)
    p /= np.linalg.norm(p)
    X = np.cross(p, rng.standard_normal(3))
    X /= np.linalg.norm(X)
    return p, X, np.cross(p, X)


def test_phi_examples():
    p = np.array([0.0, 0.0, 1.0])
    X = np.array([1.0, 0.0, 0.0])
    P = phi(p, X)
    # <p, W> X - <X, W> p
    assert np.array_equal(P @ p, X)
    assert np.array_equal(P @ X, -p)
    assert np.array_equal(P @ [0.0, 1.0, 0.0], np.zeros(3))
    assert np.array_equal(P, -P.T)


def test_phi_domain_errors():
    with pytest.raises(DomainError):
        phi([0.0, 0.0, 2.0], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        phi([0.0, 0.0, 1.0], [1.0, 0.0, 0.5])


def test_base_map_errors():
    with pytest.raises(ValueError):
        BaseMap("fold")
    with pytest.raises(ValueError):
        BaseMap("rotation", ((1.0, 0, 0), (0, 1.0, 0), (0, 0, -1.0)))
    with pytest.raises(ValueError):
        BaseMap("dilation", c=0.0)


@pytest.mark.parametrize("bm", MAPS, ids=lambda b: b.kind)
def test_base_map_is_unit_and_jacobian_matches_fd(bm, rng):
    p, X, _ = point_and_pair(rng)
    assert np.linalg.norm(bm(p)) == pytest.approx(1.0, abs=1e-12)
    h = 1e-6
    fd = (bm(p + h * X) - bm(p - h * X)) / (2 * h)
    assert np.abs(bm.jacobian(p) @ X - fd).max() <= 1e-8


@pytest.mark.parametrize("bm", MAPS, ids=lambda b: b.kind)
@given(seed=seeds, lam=st.floats(-3, 1))
def test_covariant_derivative_of_the_map(bm, seed, lam):
    p, X, _ = point_and_pair(np.random.default_rng(seed))
    fam = ConnectionFamily(bm, lam)
    out = covariant_derivative(fam, p, X, bm._formula)
    assert np.abs(out - (1.0 + lam) * fam.pushforward(p, X)).max() <= 1e-9


def test_special_parameters(rng):
    p, X, Y = point_and_pair(rng)
    bm = BaseMap()
    assert np.abs(covariant_derivative(ConnectionFamily(bm, -1.0), p, X, bm._formula)).max() <= 1e-12
    const = lambda x: [1.0 + 0 * x[0], 2.0 + 0 * x[0], -1.0 + 0 * x[0]]
    assert np.abs(covariant_derivative(ConnectionFamily(bm, 0.0), p, X, const)).max() == 0.0
    for lam in (0.0, -2.0):
        assert np.abs(curvature_from_connection(ConnectionFamily(bm, lam), p, X, Y)).max() <= 1e-12
    half = curvature_closed_form(ConnectionFamily(bm, -0.5), p, X, Y)
    assert half.norm == pytest.approx(0.75, abs=1e-12)


@pytest.mark.parametrize("bm", MAPS, ids=lambda b: b.kind)
@given(seed=seeds, lam=st.floats(-3, 1))
def test_curvature_matches_closed_form(bm, seed, lam):
    p, X, Y = point_and_pair(np.random.default_rng(seed))
    fam = ConnectionFamily(bm, lam)
    F = curvature_from_connection(fam, p, X, Y)
    closed = curvature_closed_form(fam, p, X, Y)
    assert np.abs(F - closed.matrix).max() <= 1e-8
    assert np.abs(F + F.T).max() <= 1e-12
    assert np.linalg.norm(F @ bm(p)) <= 1e-8
    assert np.linalg.norm(F, 2) == pytest.approx(closed.norm, abs=1e-8)
    assert np.abs(curvature_from_connection(fam, p, Y, X) + F).max() <= 1e-12


@given(seeds, st.floats(0, 2 * np.pi))
def test_norm_is_rotation_invariant(seed, angle):
    p, X, Y = point_and_pair(np.random.default_rng(seed))
    fam = ConnectionFamily(BaseMap(), -0.5)
    X2 = np.cos(angle) * X + np.sin(angle) * Y
    Y2 = -np.sin(angle) * X + np.cos(angle) * Y
    assert curvature_closed_form(fam, p, X2, Y2).norm == pytest.approx(curvature_closed_form(fam, p, X, Y).norm, abs=1e-12)


def test_curvature_domain_errors():
    fam = ConnectionFamily(BaseMap(), 1.0)
    with pytest.raises(DomainError):
        curvature_closed_form(fam, [0, 0, 1.0], [1.0, 0, 0.1], [0, 1.0, 0])


def test_small_loop_oracle(rng):
    p, X, Y = point_and_pair(rng)
    fam = ConnectionFamily(BaseMap(), -0.5)
    ref = curvature_closed_form(fam, p, X, Y).matrix
    est = curvature_via_loops(fam, p, X, Y, 0.05)
    assert np.linalg.norm(est - ref, 2) <= 1e-3 * np.linalg.norm(ref, 2)


def test_parallel_map_at_minus_one(rng):
    fam = ConnectionFamily(BaseMap(), -1.0)
    base = rng.standard_normal(3)
    assert holonomy_dimension(fam, base, 6, seed=2).dimension == 1
    for loop in loop_basket(base, 3, seed=5):
        assert transport_section_deviation(fam, loop) <= 1e-6


def test_flat_members_have_trivial_holonomy(rng):
    base = rng.standard_normal(3)
    for lam in (0.0, -2.0):
        assert holonomy_dimension(ConnectionFamily(BaseMap(), lam), base).dimension == 0


def test_cheeger_soul_is_the_half_member(rng):
    bundle = SoulNormalBundle(MetricModel("cheeger_so3"))
    fam = ConnectionFamily(BaseMap(), -0.5)
    for _ in range(5):
        p, X, _ = point_and_pair(rng)
        assert np.abs(bundle.connection_matrix(p, X) - fam.connection_matrix(p, X)).max() <= 1e-10


def test_lambda_sweep_rows(rng):
    p, X, Y = point_and_pair(rng)
    rows = lambda_sweep(BaseMap(), [-2.0, -1.0, 0.0], p, X, Y)
    assert [r.curvature_norm for r in rows] == pytest.approx([0.0, 1.0, 0.0], abs=1e-12)
    assert rows[0].holonomy_dim == 0 and rows[2].holonomy_dim == 0
    assert rows[1].holonomy_dim == 1
