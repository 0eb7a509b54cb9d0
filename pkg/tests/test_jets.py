import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soulgeom import jets
from soulgeom.jets import Jet

finite = st.floats(-2.0, 2.0, allow_nan=False)


def random_jet(rng, degree=4, shape=()):
    return Jet(rng.standard_normal(shape + (jets.ncoef(degree),)), degree)


def test_coefficient_count():
    assert jets.ncoef(4) == math.comb(9, 4) == 126


@pytest.mark.parametrize(
    "field, point, orders, expected",
    [
        (lambda u: u * u, [3.0], (1,), 6.0),
        (lambda u: jets.sin(u), [np.pi / 2], (4,), 1.0),
        (lambda u, v: u * v, [0.7, -1.3], (1, 1), 1.0),
        (lambda u: jets.exp(u), [0.0], (4,), 1.0),
    ],
)
def test_partials_examples(field, point, orders, expected):
    assert jets.partials(field, point, orders) == pytest.approx(expected, abs=1e-13)


def test_partials_order_limit():
    with pytest.raises(jets.UnsupportedOrderError):
        jets.partials(lambda u: u, [0.0], (5,))


def test_fd_examples():
    assert jets.fd_partials(lambda u: u * u, [3.0], (1,), 1e-3) == pytest.approx(6.0, abs=1e-9)
    assert jets.fd_partials(np.exp, [0.0], (4,), 1e-2) == pytest.approx(1.0, abs=1e-4)


def test_fd_step_errors():
    with pytest.raises(jets.StepTooSmallError):
        jets.fd_partials(np.exp, [0.0], (1,), 0.0)
    with pytest.raises(jets.StepTooSmallError):
        jets.fd_partials(np.exp, [1e12], (1,), 1e-5)


def _poly_field(coeffs, powers):
    def f(*x):
        total = 0.0
        for c, p in zip(coeffs, powers):
            term = c
            for xi, k in zip(x, p):
                term = term * xi**k if k else term
            total = total + term
        return total

    return f


def test_fd_agrees_with_jets_on_random_polynomials(rng):
    worst = 0.0
    for _ in range(100):
        powers = rng.integers(0, 3, size=(4, 3))
        coeffs = rng.standard_normal(4)
        f = _poly_field(coeffs, powers)
        x = rng.uniform(-1, 1, 3)
        orders = tuple(rng.multinomial(int(rng.integers(1, 5)), [1 / 3] * 3))
        exact = jets.partials(f, x, orders)
        approx = jets.fd_partials(f, x, orders, 1e-2)
        worst = max(worst, abs(approx - exact) / max(1.0, abs(exact)))
    assert worst <= 1e-5


def test_fd_convergence_order():
    f = lambda u, v: jets.sin(u) * jets.exp(v)  # noqa: E731
    exact = jets.partials(f, [0.3, 0.2], (1, 1))
    e1 = abs(jets.fd_partials(f, [0.3, 0.2], (1, 1), 0.2) - exact)
    e2 = abs(jets.fd_partials(f, [0.3, 0.2], (1, 1), 0.1) - exact)
    assert math.log2(e1 / e2) >= 2.0


@given(st.integers(0, 2**32 - 1))
def test_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_jet(rng) for _ in range(3))
    lhs = ((a * b) * c).c
    rhs = (a * (b * c)).c
    assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(lhs).max())
    assert np.allclose((a * (b + c)).c, (a * b + a * c).c, rtol=1e-13, atol=1e-13)
    assert np.allclose((a * b).c, (b * a).c, rtol=0, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_degree_zero_part_is_plain_arithmetic(seed):
    rng = np.random.default_rng(seed)
    a, b = random_jet(rng), random_jet(rng)
    b = b + 5.0
    assert (a * b).value == pytest.approx(a.value * b.value)
    assert (a / b).value == pytest.approx(a.value / b.value)
    assert jets.sqrt(b).value == pytest.approx(np.sqrt(b.value))
    assert jets.sin(a).value == pytest.approx(np.sin(a.value))


@given(st.lists(finite, min_size=5, max_size=5), st.integers(0, 2**32 - 1))
def test_chain_rule_on_polynomials(point, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 5))
    B = rng.standard_normal(3)

    def inner(*x):
        return [sum(A[i, j] * x[j] for j in range(5)) ** 2 for i in range(2)]

    def outer(y0, y1):
        return B[0] * y0 * y1 + B[1] * y0**2 + B[2] * y1

    composed = outer(*inner(*jets.variables(point, 4)))
    ys = inner(*np.asarray(point, float))
    # composition of jets: substitute the inner jets into the outer polynomial
    via = outer(*[jets.as_jet(v, 4) for v in inner(*jets.variables(point, 4))])
    assert np.abs(composed.c - via.c).max() <= 1e-12 * max(1.0, np.abs(composed.c).max())
    assert composed.value == pytest.approx(outer(*ys), rel=1e-12, abs=1e-12)
    # independent check of one second partial by finite differences
    fd = jets.fd_partials(lambda *x: outer(*inner(*x)), point, (1, 1), 1e-3)
    assert composed.partial((1, 1)) == pytest.approx(fd, rel=1e-5, abs=1e-5)


def test_division_by_small_pivot():
    with pytest.raises(jets.JetDivisionError):
        1.0 / Jet.variable(1e-12, 0, 2)


@given(st.integers(0, 2**32 - 1))
def test_matrix_inverse(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 4, jets.ncoef(3)))
    M[..., 0] = M[..., 0] @ M[..., 0].T + 4 * np.eye(4)
    M = 0.5 * (M + M.transpose(1, 0, 2))
    A = Jet(M, 3)
    Ainv = jets.inv(A)
    prod = A @ Ainv
    target = Jet.constant(np.eye(4), 3)
    assert np.abs(prod.c - target.c).max() <= 1e-12
    assert np.abs(Ainv.c - Ainv.c.transpose(1, 0, 2)).max() <= 1e-12


def test_solve_spd_examples():
    b = np.array([1.0, -2.0, 3.0])
    assert np.allclose(jets.solve_spd(np.eye(3), b), b)
    assert np.allclose(jets.solve_spd(2 * np.eye(3), [2.0, 0, 0]), [1.0, 0, 0])


def test_solve_spd_reproduces_cheeger_block():
    K = np.diag([2.0, 1.0, 1.0])
    cols = [jets.solve_spd(np.eye(3) + K, K[:, j]) for j in range(3)]
    assert np.allclose(np.column_stack(cols), np.diag([2 / 3, 1 / 2, 1 / 2]), atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_solve_spd_residual(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 6))
    A = A @ A.T + 0.5 * np.eye(6)
    b = rng.standard_normal(6)
    x = jets.solve_spd(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_solve_spd_rejects_indefinite():
    with pytest.raises(jets.NotPositiveDefiniteError) as err:
        jets.solve_spd(np.diag([1.0, -1.0, 1.0]), np.ones(3))
    assert err.value.pivot == 1
