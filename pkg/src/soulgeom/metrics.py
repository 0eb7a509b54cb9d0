"""Metrics on S^2 x R^3 in stereographic x Cartesian charts.

Coordinates are ``q = (u1, u2, v1, v2, v3)``: ``u`` stereographic on the
unit sphere, ``v`` Cartesian on R^3.  The ``north`` chart is centred at
``(0, 0, 1)``, the ``south`` chart at ``(0, 0, -1)``; the transition is
``u -> u / |u|^2`` on both sides.

The Cheeger metric is the SO(3)-quotient of ``round x (R^3, g_f) x (SO(3), s Q)``
computed by the complement formula

    g~ = g - m^T (s I + K)^{-1} m,   m_i(Z) = g(T_i, Z),  K_ij = g(T_i, T_j),

where ``T_i(p, V) = (e_i x p, e_i x V)`` are the diagonal rotation fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .jets import Jet

FAMILIES = ("product", "cheeger_so3", "closed_form_reference")
CHARTS = ("north", "south")


class ChartError(ValueError):
    pass


class FrameDegenerateError(ValueError):
    pass


class DegenerateSeedError(ValueError):
    pass


# ---------------------------------------------------------------- charts


def stereo_inverse(u1, u2, chart: str):
    """Unit-sphere point of chart coordinates (works on floats and jets)."""
    s = 1.0 + u1 * u1 + u2 * u2
    p3 = 2.0 / s - 1.0 if chart == "north" else 1.0 - 2.0 / s
    return [2.0 * u1 / s, 2.0 * u2 / s, p3]


def stereo_jacobian(u1, u2, chart: str):
    """Rows ``dp_i/du_a`` of the inverse stereographic map, as nested lists."""
    s = 1.0 + u1 * u1 + u2 * u2
    s2 = s * s
    sign = -1.0 if chart == "north" else 1.0
    return [
        [2.0 / s - 4.0 * u1 * u1 / s2, -4.0 * u1 * u2 / s2],
        [-4.0 * u1 * u2 / s2, 2.0 / s - 4.0 * u2 * u2 / s2],
        [sign * 4.0 * u1 / s2, sign * 4.0 * u2 / s2],
    ]


def stereo(p, chart: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    den = 1.0 + p[2] if chart == "north" else 1.0 - p[2]
    if den < 1e-12:
        raise ChartError(f"point {p} is the pole of the {chart} chart")
    return p[:2] / den


def other_chart(chart: str) -> str:
    return "south" if chart == "north" else "north"


def transition_jacobian(u) -> np.ndarray:
    """Jacobian of ``u -> u/|u|^2`` (the map between the two charts)."""
    u = np.asarray(u, dtype=float)
    r2 = u @ u
    if r2 < 1e-24:
        raise ChartError("chart transition undefined at the chart centre")
    return (np.eye(2) * r2 - 2.0 * np.outer(u, u)) / r2**2


@dataclass(frozen=True)
class ChartPoint:
    chart: str
    coords: tuple[float, float, float, float, float]

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ChartError(f"unknown chart {self.chart!r}")
        if len(self.coords) != 5:
            raise ChartError("a chart point needs five coordinates")
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def q(self) -> np.ndarray:
        return np.array(self.coords)

    @property
    def u(self) -> np.ndarray:
        return np.array(self.coords[:2])

    @property
    def v(self) -> np.ndarray:
        return np.array(self.coords[2:])

    @property
    def p(self) -> np.ndarray:
        return np.array(stereo_inverse(self.coords[0], self.coords[1], self.chart))

    @property
    def on_soul(self) -> bool:
        return bool(np.all(self.v == 0.0))

    @classmethod
    def from_ambient(cls, p, V=(0.0, 0.0, 0.0), chart: str | None = None) -> "ChartPoint":
        p = np.asarray(p, dtype=float)
        p = p / np.linalg.norm(p)
        if chart is None:
            chart = "north" if p[2] >= 0 else "south"
        return cls(chart, tuple(stereo(p, chart)) + tuple(np.asarray(V, float)))

    def to_chart(self, chart: str) -> "ChartPoint":
        if chart == self.chart:
            return self
        u = self.u
        r2 = u @ u
        if r2 < 1e-24:
            raise ChartError("chart centre has no image in the other chart")
        return ChartPoint(chart, tuple(u / r2) + self.coords[2:])

    def tangent_to_chart(self, xi, chart: str) -> np.ndarray:
        """Coordinate components of the tangent vector ``xi`` in another chart."""
        xi = np.asarray(xi, dtype=float)
        if chart == self.chart:
            return xi.copy()
        out = xi.copy()
        out[:2] = transition_jacobian(self.u) @ xi[:2]
        return out

    def chart_jacobian(self) -> np.ndarray:
        return np.array(stereo_jacobian(self.coords[0], self.coords[1], self.chart))

    def tangent_from_ambient(self, a, b=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Chart components of the ambient vector ``(a, b)`` in ``T_p S^2 x R^3``."""
        J = self.chart_jacobian()
        xi_u = np.linalg.solve(J.T @ J, J.T @ np.asarray(a, float))
        return np.concatenate([xi_u, np.asarray(b, float)])

    def tangent_to_ambient(self, xi) -> tuple[np.ndarray, np.ndarray]:
        xi = np.asarray(xi, dtype=float)
        return self.chart_jacobian() @ xi[:2], xi[2:].copy()


# ---------------------------------------------------------------- metric models


@dataclass(frozen=True)
class MetricModel:
    """A metric family on S^2 x R^3.

    ``warp`` holds the coefficients ``c1, c2, ...`` of the fibre profile
    ``(phi(r)/r)^2 = 1 + c1 r^2 + c2 r^4 + ...``; the empty tuple is flat R^3.
    """

    family: str = "cheeger_so3"
    scale: float = 1.0
    warp: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown metric family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("Cheeger scale must be positive")
        object.__setattr__(self, "warp", tuple(float(c) for c in self.warp))


def _warp(model: MetricModel, rho):
    """``h = (phi/r)^2`` and ``k = (1 - h)/r^2`` as functions of ``rho = r^2``."""
    h = 1.0 + 0.0 * rho
    k = 0.0 * rho
    for n, c in enumerate(model.warp, start=1):
        h = h + c * rho**n
        k = k - (c * rho ** (n - 1) if n > 1 else c)
    return h, k


def _cross_columns(x):
    # columns are e_i x x
    z = 0.0 * x[0]
    return [[z, x[2], -x[1]], [-x[2], z, x[0]], [x[1], -x[0], z]]


def _coordinate_metric(model: MetricModel, chart: str, xs) -> Jet:
    u1, u2, v1, v2, v3 = xs
    deg = min(x.degree for x in xs)
    zero = Jet.constant(0.0, deg)
    one = Jet.constant(1.0, deg)
    p = stereo_inverse(u1, u2, chart)
    V = [v1, v2, v3]
    dp = stereo_jacobian(u1, u2, chart)

    rho = v1 * v1 + v2 * v2 + v3 * v3
    h, k = _warp(model, rho)
    gf = jets.stack([jets.stack([h * (i == j) + k * V[i] * V[j] for j in range(3)]) for i in range(3)])

    # ambient images of coordinate vectors: rows 0-2 in R^3 (sphere), rows 3-5 in R^3 (fibre)
    E = jets.stack(
        [jets.stack(dp[i] + [zero, zero, zero]) for i in range(3)]
        + [jets.stack([zero, zero] + [one if i == j else zero for j in range(3)]) for i in range(3)]
    )
    g_sphere = jets.einsum("ka,kb->ab", E[:3], E[:3])
    g_fibre = jets.einsum("ka,kb->ab", E[3:], jets.einsum("kl,lb->kb", gf, E[3:]))
    g = g_sphere + g_fibre
    if model.family == "product":
        return g

    Cp = jets.stack([jets.stack(row) for row in _cross_columns(p)])
    CV = jets.stack([jets.stack(row) for row in _cross_columns(V)])
    gf_CV = jets.einsum("kl,li->ki", gf, CV)
    m = jets.einsum("ki,ka->ia", Cp, E[:3]) + jets.einsum("ki,ka->ia", gf_CV, E[3:])
    K = jets.einsum("ki,kj->ij", Cp, Cp) + jets.einsum("ki,kj->ij", CV, gf_CV)
    A = K + model.scale * np.eye(3)
    Ainv_m = jets.einsum("ij,ja->ia", jets.inv(A), m)
    return g - jets.einsum("ia,ib->ab", m, Ainv_m)


def _fd_metric_jet(model: MetricModel, point: ChartPoint, degree: int) -> Jet:
    steps = {0: 1e-3, 1: 1e-3, 2: 1e-3, 3: 1e-2, 4: 2e-2}

    def field(*x):
        xs = [Jet.constant(c, 0) for c in x]
        return _coordinate_metric(model, point.chart, xs).value

    c = np.zeros((5, 5, jets.ncoef(degree)))
    for idx, mono in enumerate(jets.monomials(degree)):
        order = sum(mono)
        if order == 0:
            c[..., idx] = field(*point.q)
            continue
        c[..., idx] = jets.fd_partials(field, point.q, mono, step=steps[order]) / _mono_factorial(mono)
    return Jet(c, degree)


def _mono_factorial(mono) -> float:
    return float(math.prod(math.factorial(m) for m in mono))


def metric_jet(model: MetricModel, point: ChartPoint, degree: int = jets.MAX_DEGREE, backend: str = "jet") -> Jet:
    """Taylor expansion of the 5x5 coordinate metric at ``point``."""
    if model.family == "closed_form_reference":
        if degree != 0:
            raise ValueError("the closed-form reference is only available pointwise (degree 0)")
        return Jet.constant(closed_form_coordinate_metric(point, model), 0)
    if backend == "fd":
        return _fd_metric_jet(model, point, degree)
    if backend != "jet":
        raise ValueError(f"unknown backend {backend!r}")
    return _coordinate_metric(model, point.chart, jets.variables(point.q, degree))


def metric_at(model: MetricModel, point: ChartPoint) -> np.ndarray:
    return metric_jet(model, point, degree=0).value


def killing_fields(point: ChartPoint) -> np.ndarray:
    """Chart components of ``T_1, T_2, T_3`` at ``point`` (columns)."""
    p, V = point.p, point.v
    cols = []
    for i in range(3):
        e = np.eye(3)[i]
        cols.append(point.tangent_from_ambient(np.cross(e, p), np.cross(e, V)))
    return np.array(cols).T


# ---------------------------------------------------------------- closed-form frame


def _check_theta(theta: float):
    if not (0.0 < theta < np.pi) or min(theta, np.pi - theta) < 1e-8:
        raise FrameDegenerateError(f"frame undefined at theta={theta:g}; use metric_at instead")


def closed_form_metric(theta: float) -> np.ndarray:
    """Gram matrix of the frame ``{X, A, Y, B, r}`` at ``|V| = 1`` from the K~ transcription."""
    _check_theta(theta)
    c, s = np.cos(theta), np.sin(theta)
    d = c * c - 4.0
    Kt = np.array(
        [
            [2.0 / 3.0, 0.0, 0.0],
            [0.0, 2.0 * (c * c - 1.0) / d, -s * c / d],
            [0.0, -s * c / d, -2.0 / d],
        ]
    )
    Kp = np.zeros((5, 5))
    Kp[:3, :3] = Kt
    Kp[3, 3] = 2.0
    Kp[4, 4] = 1.0
    N = np.array(
        [
            [0.5, 0.0, 0.5, 0.0, 0.0],
            [0.0, -c / s, 0.0, 1.0 / s, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, -0.5, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    return N.T @ Kp @ N


def killing_gram(theta: float, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``K`` and ``s K (s I + K)^{-1}`` in the basis ``T_1, T_2, T_3`` at ``|V| = 1``."""
    c, s = np.cos(theta), np.sin(theta)
    K = np.array([[2.0, 0.0, 0.0], [0.0, s * s, s * c], [0.0, s * c, 1.0 + c * c]])
    A = K + scale * np.eye(3)
    Kt = scale * K @ np.column_stack([jets.solve_spd(A, np.eye(3)[:, j]) for j in range(3)])
    return K, Kt


def adapted_frame(p, V) -> dict:
    """Ambient vectors of the frame ``{X, A, Y, B, r}`` at ``(p, V)`` with ``|V| = 1``."""
    p = np.asarray(p, float)
    V = np.asarray(V, float)
    r = np.linalg.norm(V)
    if r < 1e-12:
        raise FrameDegenerateError("frame needs V != 0")
    Vh = V / r
    theta = float(np.arccos(np.clip(Vh @ p, -1.0, 1.0)))
    _check_theta(theta)
    W = Vh - (Vh @ p) * p
    W /= np.linalg.norm(W)
    U = np.cross(W, p)
    z = np.zeros(3)
    c, s = np.cos(theta), np.sin(theta)
    return {
        "theta": theta,
        "W": W,
        "U": U,
        "X": (-W, z),
        "A": (U, z),
        "Y": (z, s * p - c * W),
        "B": (z, U),
        "r": (z, Vh),
    }


FRAME_NAMES = ("X", "A", "Y", "B", "r")


def frame_coordinates(point: ChartPoint) -> np.ndarray:
    """5x5 matrix whose columns are the chart components of ``X, A, Y, B, r``."""
    fr = adapted_frame(point.p, point.v)
    return np.column_stack([point.tangent_from_ambient(*fr[n]) for n in FRAME_NAMES])


def closed_form_coordinate_metric(point: ChartPoint, model: MetricModel | None = None) -> np.ndarray:
    if model is not None and model.scale != 1.0:
        raise ValueError("the closed-form reference assumes scale 1")
    if abs(np.linalg.norm(point.v) - 1.0) > 1e-12:
        raise ValueError("the closed-form reference is only defined at |V| = 1")
    F = frame_coordinates(point)
    theta = adapted_frame(point.p, point.v)["theta"]
    Finv = np.linalg.inv(F)
    return Finv.T @ closed_form_metric(theta) @ Finv


def horizontal_space_closed_form(theta: float) -> np.ndarray:
    """Rows ``X + Y/2`` and ``A + (cos theta / 2) B`` in the frame basis."""
    _check_theta(theta)
    return np.array([[1.0, 0.0, 0.5, 0.0, 0.0], [0.0, 1.0, 0.0, 0.5 * np.cos(theta), 0.0]])


def horizontal_space(model: MetricModel, point: ChartPoint) -> np.ndarray:
    """Chart components (rows) of the two horizontal vectors at ``point``.

    At ``|V| = 1`` these are the closed-form vectors pushed into the chart; elsewhere
    the g~-orthogonal complement of the fibre directions is returned.
    """
    if np.linalg.norm(point.v) < 1e-12:
        raise FrameDegenerateError("horizontal space formula needs V != 0")
    theta = adapted_frame(point.p, point.v / np.linalg.norm(point.v))["theta"]
    _check_theta(theta)
    if abs(np.linalg.norm(point.v) - 1.0) < 1e-12:
        F = frame_coordinates(point)
        return (F @ horizontal_space_closed_form(theta).T).T
    g = metric_at(model, point)
    # lift du-directions by removing their fibre component
    lift = np.zeros((2, 5))
    lift[:, :2] = np.eye(2)
    lift[:, 2:] = -np.linalg.solve(g[2:, 2:], g[2:, :2]).T
    return lift


# ---------------------------------------------------------------- soul frames


@dataclass(frozen=True)
class SoulFrame:
    point: ChartPoint
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    U: np.ndarray
    V: np.ndarray

    @property
    def tangent(self) -> np.ndarray:
        return np.array([self.X, self.Y])

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.W, self.U, self.V])

    def matrix(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.W, self.U, self.V]).T


def _gram_schmidt(vectors, g):
    out = []
    for v in vectors:
        w = np.array(v, float)
        for e in out:
            w = w - (e @ g @ w) * e
        n2 = w @ g @ w
        if n2 < 1e-20:
            raise DegenerateSeedError("seed vectors are linearly dependent")
        out.append(w / np.sqrt(n2))
    return out


def soul_frame(
    model: MetricModel,
    point: ChartPoint,
    tangent_seed=None,
    normal_seed=None,
    third_seed=None,
) -> SoulFrame:
    """g~-orthonormal frame at a soul point: oriented tangent pair and normal triple.

    ``W`` defaults to the ``p`` direction of the fibre.  ``(W, U, V)`` is
    right-handed in the fibre's ``v`` coordinates; ``(X, Y)`` is positively
    oriented with respect to ``(du1, du2)``.
    """
    if not point.on_soul:
        raise ValueError("soul_frame needs a point with V = 0")
    g = metric_at(model, point)
    if tangent_seed is None:
        tangent_seed = np.array([1.0, 0, 0, 0, 0])
    tangent_seed = np.asarray(tangent_seed, float).copy()
    tangent_seed[2:] = 0.0
    if np.linalg.norm(tangent_seed) < 1e-12:
        raise DegenerateSeedError("tangent seed has no component along the soul")
    X = _gram_schmidt([tangent_seed], g)[0]
    Y = np.array([0.0, 0.0, 0.0, 0.0, 0.0])
    Y[0], Y[1] = -X[1], X[0]
    Y = _gram_schmidt([X, Y], g)[1]

    if normal_seed is None:
        normal_seed = np.concatenate([[0.0, 0.0], point.p])
    normal_seed = np.asarray(normal_seed, float).copy()
    # project to the g~-normal space of T Sigma
    for e in (X, Y):
        normal_seed = normal_seed - (e @ g @ normal_seed) * e
    if np.linalg.norm(normal_seed[2:]) < 1e-10:
        raise DegenerateSeedError("normal seed is numerically tangent to the soul")
    W = normal_seed / np.sqrt(normal_seed @ g @ normal_seed)
    if third_seed is None:
        k = int(np.argmin(np.abs(W[2:])))
        third_seed = np.zeros(5)
        third_seed[2 + k] = 1.0
    third_seed = np.asarray(third_seed, float).copy()
    third_seed[:2] = 0.0
    _, U = _gram_schmidt([W, third_seed], g)
    V = np.zeros(5)
    V[2:] = np.cross(W[2:], U[2:])
    V = _gram_schmidt([W, U, V], g)[2]
    return SoulFrame(point, X, Y, W, U, V)
