"""Connections ``flat + lam * Phi(f, df)`` on the trivial R^3 bundle over the unit sphere.

``Phi(p, X) W = <p, W> X - <X, W> p`` is the skew matrix ``X p^T - p X^T``.
Base maps come from a small catalog of explicitly differentiable maps of the
sphere; their differentials are taken with jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .metrics import ChartPoint, stereo_inverse
from .transport import (
    ChartOverflowError,
    DomainError,
    HolonomyAlgebra,
    chart_rectangle_loop,
    hat,
    holonomy_algebra,
    holonomy_loop,
    loop_basket,
    so3_log,
)

BASE_MAPS = ("identity", "rotation", "dilation")


def phi(p, X) -> np.ndarray:
    p = np.asarray(p, float)
    X = np.asarray(X, float)
    if abs(p @ p - 1.0) > 1e-10:
        raise DomainError("p must be a unit vector")
    if abs(p @ X) > 1e-10:
        raise DomainError("X must be tangent to the sphere at p")
    return np.outer(X, p) - np.outer(p, X)


@dataclass(frozen=True)
class BaseMap:
    """Self-map of the unit sphere.

    ``rotation`` applies the fixed matrix ``matrix``; ``dilation`` moves points
    along meridians through the north pole by ``tan(rho/2) = c tan(theta/2)``.
    """

    kind: str = "identity"
    matrix: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in BASE_MAPS:
            raise ValueError(f"unknown base map {self.kind!r}; choose from {BASE_MAPS}")
        R = np.asarray(self.matrix, float)
        if self.kind == "rotation" and (np.abs(R.T @ R - np.eye(3)).max() > 1e-12 or np.linalg.det(R) < 0):
            raise ValueError("rotation base map needs a proper orthogonal matrix")
        if self.kind == "dilation" and not self.c > 0:
            raise ValueError("dilation factor must be positive")

    def _formula(self, x):
        if self.kind == "identity":
            return list(x)
        if self.kind == "rotation":
            R = np.asarray(self.matrix, float)
            return [sum(R[i, j] * x[j] for j in range(3)) for i in range(3)]
        c = self.c
        den = (1.0 + c * c) + (1.0 - c * c) * x[2]
        return [2 * c * x[0] / den, 2 * c * x[1] / den, ((1.0 + x[2]) - c * c * (1.0 - x[2])) / den]

    def __call__(self, p) -> np.ndarray:
        return np.array([float(np.asarray(v)) for v in self._formula(np.asarray(p, float))])

    def jacobian(self, p) -> np.ndarray:
        """3x3 differential of the ambient extension of the map at ``p``."""
        xs = jets.variables(np.asarray(p, float), 1)
        out = [jets.as_jet(v, 1) for v in self._formula(xs)]
        return np.array([[o.partial(tuple(int(k == j) for k in range(3))) for j in range(3)] for o in out])


@dataclass(frozen=True)
class ConnectionFamily:
    base_map: BaseMap = BaseMap()
    lam: float = 0.0

    def pushforward(self, p, X) -> np.ndarray:
        return self.base_map.jacobian(p) @ np.asarray(X, float)

    def connection_matrix(self, p, pdot) -> np.ndarray:
        p = np.asarray(p, float)
        p = p / np.linalg.norm(p)
        pdot = np.asarray(pdot, float)
        pdot = pdot - (pdot @ p) * p
        fp = self.base_map(p)
        return self.lam * phi(fp / np.linalg.norm(fp), self.pushforward(p, pdot))

    def with_lambda(self, lam: float) -> "ConnectionFamily":
        return ConnectionFamily(self.base_map, float(lam))


def _check_tangent(p, *vecs):
    p = np.asarray(p, float)
    if abs(p @ p - 1.0) > 1e-10:
        raise DomainError("p must be a unit vector")
    for v in vecs:
        if abs(p @ np.asarray(v, float)) > 1e-10:
            raise DomainError("vectors must be tangent to the sphere at p")


def covariant_derivative(family: ConnectionFamily, p, X, section) -> np.ndarray:
    """``ds(X) + lam Phi(f(p), df(X)) s(p)``; ``section`` maps R^3 -> R^3 and accepts jets."""
    p = np.asarray(p, float)
    X = np.asarray(X, float)
    _check_tangent(p, X)
    xs = jets.variables(p, 1)
    s = [jets.as_jet(v, 1) for v in section(xs)]
    ds = np.array([[si.partial(tuple(int(k == j) for k in range(3))) for j in range(3)] for si in s])
    value = np.array([si.value for si in s], dtype=float)
    return ds @ X + family.connection_matrix(p, X) @ value


@dataclass
class ClosedFormCurvature:
    matrix: np.ndarray
    norm: float


def curvature_closed_form(family: ConnectionFamily, p, X, Y) -> ClosedFormCurvature:
    """``lam (lam + 2) (Ybar Xbar^T - Xbar Ybar^T)`` with ``Xbar = df(X)``."""
    _check_tangent(p, X, Y)
    lam = family.lam
    Xb = family.pushforward(p, X)
    Yb = family.pushforward(p, Y)
    M = lam * (lam + 2.0) * (np.outer(Yb, Xb) - np.outer(Xb, Yb))
    wedge = np.sqrt(max((Xb @ Xb) * (Yb @ Yb) - (Xb @ Yb) ** 2, 0.0))
    return ClosedFormCurvature(M, abs(lam * lam + 2.0 * lam) * wedge)


def curvature_from_connection(family: ConnectionFamily, p, X, Y) -> np.ndarray:
    """``d omega + omega ^ omega`` evaluated in the stereographic chart around ``p`` (jets)."""
    p = np.asarray(p, float)
    _check_tangent(p, X, Y)
    pt = ChartPoint.from_ambient(p, np.zeros(3))
    us = jets.variables(pt.u, 2)
    P = stereo_inverse(us[0], us[1], pt.chart)
    fP = jets.stack([jets.as_jet(v, 2) for v in family.base_map._formula(P)])
    # df applied to the chart basis: d(f o P)/du_a
    dF = jets.stack([fP.deriv(a) for a in range(2)], axis=1)  # (3, 2) degree 1
    fP1 = fP.truncate(1)
    om = [family.lam * (jets.einsum("i,j->ij", dF[:, a], fP1) - jets.einsum("i,j->ij", fP1, dF[:, a])) for a in range(2)]
    F = om[1].deriv(0) - om[0].deriv(1) + (om[0] @ om[1]).truncate(0) - (om[1] @ om[0]).truncate(0)
    xi = np.linalg.lstsq(pt.chart_jacobian(), np.column_stack([X, Y]), rcond=None)[0]
    return F.value * (xi[0, 0] * xi[1, 1] - xi[1, 0] * xi[0, 1])


def _chart_coords(p, v):
    pt = ChartPoint.from_ambient(np.asarray(p, float), np.zeros(3))
    J = pt.chart_jacobian()
    return pt, np.linalg.lstsq(J, np.asarray(v, float), rcond=None)[0]


def curvature_via_loops(family: ConnectionFamily, p, X, Y, h: float) -> np.ndarray:
    """Transport around the chart parallelogram spanned by ``h X, h Y``; returns ``-log(Q)/h^2``."""
    _check_tangent(p, X, Y)
    pt, xi_x = _chart_coords(p, X)
    _, xi_y = _chart_coords(p, Y)
    loop = chart_rectangle_loop(pt.chart, pt.u, xi_x, xi_y, h)
    Q = holonomy_loop(family, loop).matrix
    return -hat(so3_log(Q)) / h**2


def holonomy_dimension(family: ConnectionFamily, base, loops: int = 6, seed: int = 0) -> HolonomyAlgebra:
    return holonomy_algebra(family, loop_basket(base, loops, seed))


def transport_section_deviation(family: ConnectionFamily, loop) -> float:
    """``|Q f(p) - f(p)|`` for the holonomy ``Q`` of ``loop`` at its base point."""
    Q = holonomy_loop(family, loop).matrix
    fp = family.base_map(loop.base)
    return float(np.linalg.norm(Q @ fp - fp))


@dataclass
class SweepRow:
    lam: float
    curvature_norm: float
    holonomy_dim: int


def lambda_sweep(base_map: BaseMap, lambdas, p, X, Y, loops: int = 6, seed: int = 0) -> list[SweepRow]:
    """Closed-form curvature norm and holonomy-algebra dimension for each ``lam``."""
    rows = []
    for lam in lambdas:
        fam = ConnectionFamily(base_map, float(lam))
        norm = curvature_closed_form(fam, p, X, Y).norm
        dim = holonomy_dimension(fam, p, loops, seed).dimension
        rows.append(SweepRow(float(lam), norm, dim))
    return rows


__all__ = [
    "BASE_MAPS",
    "BaseMap",
    "ChartOverflowError",
    "ConnectionFamily",
    "covariant_derivative",
    "curvature_closed_form",
    "curvature_from_connection",
    "curvature_via_loops",
    "holonomy_dimension",
    "lambda_sweep",
    "phi",
    "transport_section_deviation",
]
