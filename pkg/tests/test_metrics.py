import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soulgeom.metrics import (
    ChartError,
    ChartPoint,
    DegenerateSeedError,
    FrameDegenerateError,
    MetricModel,
    closed_form_coordinate_metric,
    closed_form_metric,
    frame_coordinates,
    horizontal_space,
    horizontal_space_closed_form,
    killing_fields,
    killing_gram,
    metric_at,
    metric_jet,
    soul_frame,
    transition_jacobian,
)
from soulgeom.transport import rotation

CHEEGER = MetricModel("cheeger_so3")
PRODUCT = MetricModel("product")
seeds = st.integers(0, 2**32 - 1)


def random_point(rng, vmax=1.5):
    p = rng.standard_normal(3)
    V = rng.standard_normal(3)
    V *= rng.uniform(0, vmax) / np.linalg.norm(V)
    return ChartPoint.from_ambient(p, V)


def point_at_angle(theta, p=(0.3, -0.4, 0.866)):
    p = np.asarray(p, float) / np.linalg.norm(p)
    w = np.cross(p, [1.0, 0.0, 0.0])
    w /= np.linalg.norm(w)
    return ChartPoint.from_ambient(p, np.cos(theta) * p + np.sin(theta) * w)


def test_unknown_family_and_scale():
    with pytest.raises(ValueError):
        MetricModel("warped")
    with pytest.raises(ValueError):
        MetricModel("cheeger_so3", scale=0.0)


@given(seeds)
def test_chart_transitions_are_inverse(seed):
    pt = random_point(np.random.default_rng(seed))
    if np.linalg.norm(pt.u) < 1e-3:
        return
    other = pt.to_chart("south" if pt.chart == "north" else "north")
    back = other.to_chart(pt.chart)
    assert np.abs(back.q - pt.q).max() <= 1e-12
    assert np.linalg.norm(pt.p) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(other.p - pt.p).max() <= 1e-12


def test_chart_errors():
    with pytest.raises(ChartError):
        ChartPoint("east", (0, 0, 0, 0, 0))
    with pytest.raises(ChartError):
        ChartPoint.from_ambient([0, 0, -1.0], chart="north")


@given(seeds, st.sampled_from(["product", "cheeger_so3"]))
def test_metric_symmetric_positive(seed, family):
    g = metric_at(MetricModel(family), random_point(np.random.default_rng(seed)))
    assert np.abs(g - g.T).max() <= 1e-14
    assert np.linalg.eigvalsh(g).min() > 0


def test_product_metric_is_block_diagonal(rng):
    pt = random_point(rng)
    g = metric_at(PRODUCT, pt)
    conf = 4.0 / (1.0 + pt.u @ pt.u) ** 2
    target = np.zeros((5, 5))
    target[:2, :2] = conf * np.eye(2)
    target[2:, 2:] = np.eye(3)
    assert np.abs(g - target).max() <= 1e-14


def test_warp_profile_enters_the_fibre():
    model = MetricModel("product", warp=(0.5,))
    pt = ChartPoint.from_ambient([0, 0, 1.0], [0.0, 0.0, 2.0])
    g = metric_at(model, pt)[2:, 2:]
    # radial direction keeps length; tangential directions are scaled by (phi/r)^2 = 1 + 0.5 r^2
    assert g[2, 2] == pytest.approx(1.0)
    assert g[0, 0] == pytest.approx(3.0)


def test_killing_block_at_right_angle():
    pt = ChartPoint.from_ambient([0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
    T = killing_fields(pt)
    assert np.abs(T.T @ metric_at(CHEEGER, pt) @ T - np.diag([2 / 3, 1 / 2, 1 / 2])).max() <= 1e-12
    assert np.abs(killing_gram(np.pi / 2)[1] - np.diag([2 / 3, 1 / 2, 1 / 2])).max() <= 1e-12


def test_large_scale_recovers_product(rng):
    model = MetricModel("cheeger_so3", scale=1e6)
    for _ in range(5):
        pt = random_point(rng)
        g = metric_at(PRODUCT, pt)
        assert np.linalg.norm(metric_at(model, pt) - g) <= 10 * np.linalg.norm(g) / 1e6


@given(seeds)
def test_complement_unchanged(seed):
    pt = random_point(np.random.default_rng(seed))
    g = metric_at(PRODUCT, pt)
    T = killing_fields(pt)
    Z = np.linalg.svd(T.T @ g)[2][3:]  # g-orthogonal to every T_i
    assert np.abs(Z @ metric_at(CHEEGER, pt) - Z @ g).max() <= 1e-12 * max(1.0, np.abs(g).max())


@given(seeds)
def test_chart_independence(seed):
    rng = np.random.default_rng(seed)
    pt = random_point(rng)
    if not 0.3 < np.linalg.norm(pt.u) < 3:
        return
    other = pt.to_chart("south" if pt.chart == "north" else "north")
    J = np.eye(5)
    J[:2, :2] = transition_jacobian(pt.u)
    lhs = metric_at(CHEEGER, pt)
    rhs = J.T @ metric_at(CHEEGER, other) @ J
    assert np.abs(lhs - rhs).max() <= 1e-10


@given(seeds)
def test_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    pt = random_point(rng)
    R = rotation(rng.standard_normal(3), rng.uniform(0, np.pi))
    moved = ChartPoint.from_ambient(R @ pt.p, R @ pt.v)
    a, b = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
    a[0] -= (a[0] @ pt.p) * pt.p
    b[0] -= (b[0] @ pt.p) * pt.p
    xi, eta = pt.tangent_from_ambient(*a), pt.tangent_from_ambient(*b)
    xr, er = moved.tangent_from_ambient(*(R @ a.T).T), moved.tangent_from_ambient(*(R @ b.T).T)
    assert xi @ metric_at(CHEEGER, pt) @ eta == pytest.approx(xr @ metric_at(CHEEGER, moved) @ er, abs=1e-10)


def test_closed_form_examples():
    G = closed_form_metric(np.pi / 2)
    assert G[2, 2] == pytest.approx(2 / 3, abs=1e-15)
    assert G[2, 3] == pytest.approx(0.0, abs=1e-15)
    assert G[3, 3] == pytest.approx(1 / 2, abs=1e-15)
    for theta in np.linspace(0.1, 3.0, 7):
        assert closed_form_metric(theta)[4, 4] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("theta", [0.0, np.pi])
def test_closed_form_endpoints(theta):
    with pytest.raises(FrameDegenerateError):
        closed_form_metric(theta)
    with pytest.raises(FrameDegenerateError):
        horizontal_space_closed_form(theta)


def test_closed_form_matches_complement_formula():
    worst = 0.0
    for theta in np.linspace(0, np.pi, 52)[1:-1]:
        pt = point_at_angle(theta)
        worst = max(worst, np.abs(closed_form_coordinate_metric(pt) - metric_at(CHEEGER, pt)).max())
    assert worst <= 1e-10


def test_closed_form_reference_family():
    pt = point_at_angle(1.1)
    ref = MetricModel("closed_form_reference")
    assert np.abs(metric_at(ref, pt) - metric_at(CHEEGER, pt)).max() <= 1e-10
    with pytest.raises(ValueError):
        metric_jet(ref, pt, degree=2)


def test_horizontal_space():
    assert np.allclose(horizontal_space_closed_form(np.pi / 2), [[1, 0, 0.5, 0, 0], [0, 1, 0, 0, 0]])
    for theta in np.linspace(0, np.pi, 22)[1:-1]:
        pt = point_at_angle(theta)
        g = metric_at(CHEEGER, pt)
        H = horizontal_space(CHEEGER, pt)
        F = frame_coordinates(pt)
        assert np.abs(H @ g @ F[:, 2:]).max() <= 1e-10
        assert np.all(np.einsum("ia,ab,ib->i", H, g, H) > 0)


def test_horizontal_space_off_unit_sphere():
    pt = ChartPoint.from_ambient([0.2, 0.1, 1.0], [0.3, -0.9, 0.5])
    H = horizontal_space(CHEEGER, pt)
    g = metric_at(CHEEGER, pt)
    assert np.abs(H @ g[:, 2:]).max() <= 1e-12


def test_soul_frame_product():
    pt = ChartPoint.from_ambient([0.3, 0.2, 0.9])
    fr = soul_frame(PRODUCT, pt)
    M = fr.matrix()
    assert np.abs(M.T @ metric_at(PRODUCT, pt) @ M - np.eye(5)).max() <= 1e-12


def test_soul_frame_cheeger():
    pt = ChartPoint.from_ambient([0.0, 1.0, 0.0])
    g = metric_at(CHEEGER, pt)
    T = killing_fields(pt)
    assert np.sqrt(T[:, 0] @ g @ T[:, 0]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert np.sqrt(T[:, 2] @ g @ T[:, 2]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert np.abs(g[:2, 2:]).max() <= 1e-12
    fr = soul_frame(CHEEGER, pt)
    M = fr.matrix()
    assert np.abs(M.T @ g @ M - np.eye(5)).max() <= 1e-10


def test_soul_frame_degenerate_seed():
    pt = ChartPoint.from_ambient([0.3, 0.2, 0.9])
    with pytest.raises(DegenerateSeedError):
        soul_frame(CHEEGER, pt, normal_seed=[1.0, 0.0, 0.0, 0.0, 0.0])
