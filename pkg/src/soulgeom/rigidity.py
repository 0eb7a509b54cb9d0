"""Rigidity quantities on the soul: nullity section, soul scalars, the gap functional.

Normal vectors are written in the frame ``d/dv`` of the soul's normal bundle
(orthonormal along ``{V = 0}`` for the supported models, which is checked);
tangent vectors on the soul are 2-vectors in chart coordinates ``u``.

For a tangent ``X`` (with oriented completion ``Y``) and a normal 2-plane
spanned by orthonormal ``E1, E2`` the gap is

    R(X,Y,Y,X) (|R(E1,E2)X|^2 + 2/3 D2R(X,X;E1,E2,E2,E1)) - DR(X;X,Y,E1,E2)^2,

which only depends on the plane, through ``n = E1 x E2``: ``gap = n^T Q n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial import cKDTree

from . import jets
from .connection import curvature_closed_form
from .curvature import CurvaturePacket, FrameError, christoffel, curvature_at, levi_civita, restrict
from .jets import Jet
from .metrics import ChartPoint, MetricModel, metric_jet, stereo_inverse
from .transport import GreatCircleArc, SoulNormalBundle, transport_along

DEGENERATE_F = 1e-8
PARALLEL_W = 1e-8

_EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_i, _j, _k] = 1.0
    _EPS[_j, _i, _k] = -1.0


class IndeterminateError(ValueError):
    """The curvature nullity direction is not unique at this point."""


class OptimizationError(RuntimeError):
    pass


def soul_point(p) -> ChartPoint:
    p = np.asarray(p, float)
    return ChartPoint.from_ambient(p / np.linalg.norm(p), np.zeros(3))


def _cross(a, b):
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]


def oriented_pair(h: np.ndarray, X=None) -> tuple[np.ndarray, np.ndarray]:
    """``h``-orthonormal ``(X, Y)`` with ``det[X Y] > 0``; ``X`` defaults to the first axis."""
    X = np.array([1.0, 0.0]) if X is None else np.asarray(X, float)[:2]
    X = X / np.sqrt(X @ h @ X)
    Y = np.array([-X[1], X[0]])
    Y = Y - (X @ h @ Y) * X
    Y = Y / np.sqrt(Y @ h @ Y)
    return X, Y


def _lift(x2) -> np.ndarray:
    return np.r_[np.asarray(x2, float), 0.0, 0.0, 0.0]


def _lift_normal(e3) -> np.ndarray:
    return np.r_[0.0, 0.0, np.asarray(e3, float)]


# ---------------------------------------------------------------- soul jets


@dataclass
class SoulJets:
    """Everything the rigidity functionals need at one soul point."""

    point: ChartPoint
    packet: CurvaturePacket
    h: np.ndarray
    gamma_soul: np.ndarray  # Gamma^c_ab of the induced metric
    gauss: float
    omega: Jet  # omega[a][j, i] = Gamma^{v_j}_{u_a v_i}, along the soul
    normal_R: Jet  # R(d_a, d_b, n_i, n_j)
    vertical_R: Jet  # R(n_i, n_j, n_k, n_l)
    axis: Jet
    F: Jet
    W: Jet
    indeterminate: bool

    # -- scalar fields on the soul
    @property
    def g0_g1(self) -> tuple[Jet, Jet]:
        W = list(self.W)
        e = np.eye(3)[int(np.argmin(np.abs(self.W.value)))]
        U = _cross(W, e)
        V = _cross(W, U)
        U = jets.stack(U)
        V = jets.stack(V)
        Wj = self.W
        Rv = self.vertical_R
        uu = (U * U).sum()
        g0 = jets.einsum("ijkl,i->jkl", Rv, Wj)
        g0 = jets.einsum("jkl,j->kl", g0, U)
        g0 = jets.einsum("kl,k->l", g0, U)
        g0 = (g0 * Wj).sum() / uu
        g1 = jets.einsum("ijkl,i->jkl", Rv, U)
        g1 = jets.einsum("jkl,j->kl", g1, V)
        g1 = jets.einsum("kl,k->l", g1, V)
        g1 = (g1 * U).sum() / (uu * (V * V).sum())
        return g0, g1

    def field(self, name: str) -> Jet:
        if name == "F":
            return self.F
        if name == "g0":
            return self.g0_g1[0]
        if name == "g1":
            return self.g0_g1[1]
        raise KeyError(name)

    def frame(self, X=None) -> tuple[np.ndarray, np.ndarray]:
        return oriented_pair(self.h, X)

    def check_unit(self, X) -> np.ndarray:
        X = np.asarray(X, float)[:2]
        if abs(X @ self.h @ X - 1.0) > 1e-8:
            raise FrameError("X must be unit length in the soul metric")
        return X

    def directional(self, f: Jet, X) -> float:
        return float(sum(X[a] * f.deriv(a).value for a in range(2)))

    def hessian(self, f: Jet, X) -> float:
        """``X(Xf) - (D_X X) f`` for the induced Levi-Civita connection."""
        X = np.asarray(X, float)
        d1 = np.array([f.deriv(a).value for a in range(2)])
        d2 = np.array([[f.deriv(a).deriv(b).value for b in range(2)] for a in range(2)])
        return float(X @ d2 @ X - np.einsum("cab,a,b,c->", self.gamma_soul, X, X, d1))

    # -- covariant derivatives of W
    def _DW(self) -> Jet:
        """``DW[a] = d_a W + omega_a W`` (degree 1)."""
        return jets.stack([self.W.deriv(a) + jets.einsum("ji,i->j", self.omega[a], self.W) for a in range(2)])

    def nabla_W(self, X) -> np.ndarray:
        DW = self._DW().value
        return np.asarray(X, float) @ DW

    def nabla2_W(self, X) -> np.ndarray:
        """``(D^2 W)(X, X)``; equals ``W''`` along the geodesic with velocity ``X``."""
        DW = self._DW()
        om = self.omega.value
        out = np.zeros((2, 2, 3))  # out[b, a] = (D_b DW)_a
        for b in range(2):
            dDW = DW.deriv(b).value
            for a in range(2):
                out[b, a] = dDW[a] + om[b] @ DW.value[a] - self.gamma_soul[:, b, a] @ DW.value
        X = np.asarray(X, float)
        return np.einsum("b,a,bak->k", X, X, out)

    def a(self, X) -> float:
        return float(np.linalg.norm(self.nabla_W(X)))

    # -- normal curvature
    def normal_matrix(self, X, Y) -> np.ndarray:
        """``M[j, i] = <R(X,Y) n_i, n_j>``."""
        return np.einsum("abij,a,b->ji", self.normal_R.value, X, Y)

    def D_normal_R(self) -> np.ndarray:
        """Normal-projected covariant derivative ``DRN[c, a, b, i, j]``."""
        RN = self.normal_R
        G = self.gamma_soul
        om = self.omega.value
        val = RN.value
        out = np.empty((2, 2, 2, 3, 3))
        for c in range(2):
            d = RN.deriv(c).value
            d = d - np.einsum("ea,ebij->abij", G[:, c, :], val)
            d = d - np.einsum("eb,aeij->abij", G[:, c, :], val)
            d = d - np.einsum("mi,abmj->abij", om[c], val)
            d = d - np.einsum("mj,abim->abij", om[c], val)
            out[c] = d
        return out

    def DX_normal(self, X, Y) -> np.ndarray:
        """``T[i, j] = <(D_X R^nu)(X, Y) n_i, n_j>``."""
        return np.einsum("cabij,c,a,b->ij", self.D_normal_R(), X, X, Y)

    def normal_frame(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
        """``(W, U, V)`` with ``V = D_X W / a`` and ``<R(X,Y)V, U> >= 0``; flag set when ``a`` ~ 0."""
        if self.indeterminate:
            raise IndeterminateError("nullity direction undefined (normal curvature vanishes)")
        W = self.W.value
        dW = self.nabla_W(X)
        a = np.linalg.norm(dW)
        parallel = a <= PARALLEL_W
        if parallel:
            e = np.eye(3)[int(np.argmin(np.abs(W)))]
            V = np.cross(W, e)
            V = V / np.linalg.norm(V)
        else:
            V = dW / a
        U = np.cross(V, W)
        _, Y = self.frame(X)
        if U @ self.normal_matrix(X, Y) @ V < 0:
            U = -U
        return W, U, V, parallel

    def G(self, X, E1, E2) -> float:
        """Gap functional with the normal curvature in place of ambient ``R(E1,E2)X``."""
        X = np.asarray(X, float)
        _, Y = self.frame(X)
        E1 = np.asarray(E1, float)
        E2 = np.asarray(E2, float)
        rn = E2 @ self.normal_matrix(X, Y) @ E1
        d2 = self.packet.D2R(_lift(X), _lift(X), _lift_normal(E1), _lift_normal(E2), _lift_normal(E2), _lift_normal(E1))
        lhs = (E1 @ self.DX_normal(X, Y) @ E2) ** 2
        return self.gauss * (rn**2 + (2.0 / 3.0) * d2) - lhs


def _check_normal_frame(gjet: Jet):
    gu = restrict(gjet[:2, 2:], 2)
    gv = restrict(gjet[2:, 2:], 2) - np.eye(3)
    if max(np.abs(gu.c).max(), np.abs(gv.c).max()) > 1e-9:
        raise FrameError("the d/dv frame is not orthonormal along the soul for this model")


def soul_jets(model: MetricModel, point: ChartPoint) -> SoulJets:
    if not point.on_soul:
        raise ValueError("soul_jets needs a point with V = 0")
    g = metric_jet(model, point, degree=4)
    jets.cholesky(g.value)
    _check_normal_frame(g)
    lc = levi_civita(g, 5)
    packet = CurvaturePacket(
        point=point,
        metric=g.value.copy(),
        christoffel=lc["gamma"].value.copy(),
        riemann=lc["R"].value.copy(),
        nabla_riemann=lc["DR"].value.copy(),
        nabla2_riemann=lc["D2R"].value.copy(),
    )
    h = restrict(g[:2, :2], 2)
    gamma_soul = christoffel(h, 2).value
    hlc = levi_civita(h.truncate(2), 2)
    hv = h.value
    gauss = float(hlc["R"].value[0, 1, 1, 0] / np.linalg.det(hv))

    gamma = restrict(lc["gamma"], 2)
    omega = jets.stack([gamma[2:, a, 2:] for a in range(2)])
    R = restrict(lc["R"], 2)
    RN = R[:2, :2, 2:, 2:]
    Rv = R[2:, 2:, 2:, 2:]
    axis = jets.stack([RN[0, 1, 1, 2], RN[0, 1, 2, 0], RN[0, 1, 0, 1]])
    deth = h[0, 0].truncate(2) * h[1, 1].truncate(2) - h[0, 1].truncate(2) * h[0, 1].truncate(2)
    norm_axis_val = float(np.linalg.norm(axis.value))
    indeterminate = norm_axis_val / np.sqrt(np.linalg.det(hv)) <= DEGENERATE_F
    if indeterminate:
        F = Jet.constant(0.0, 2)
        W = Jet.constant(np.eye(3)[0], 2)
    else:
        n2 = (axis * axis).sum()
        F = jets.sqrt(n2 / deth)
        W = axis / jets.sqrt(n2)
    return SoulJets(point, packet, hv, gamma_soul, gauss, omega, RN, Rv, axis, F, W, indeterminate)


# ---------------------------------------------------------------- soul scalars


@dataclass
class SoulScalars:
    F: float
    a: float
    g0: float
    g1: float
    XF: float
    hess_g0: float
    hess_g1: float
    gauss: float


def soul_scalars(model: MetricModel, point: ChartPoint, X=None, soul: SoulJets | None = None) -> SoulScalars:
    soul = soul or soul_jets(model, point)
    if soul.indeterminate:
        raise IndeterminateError("nullity direction undefined (normal curvature vanishes)")
    X = soul.frame(X)[0] if X is None else soul.check_unit(X)
    g0, g1 = soul.g0_g1
    return SoulScalars(
        F=float(soul.F.value),
        a=soul.a(X),
        g0=float(g0.value),
        g1=float(g1.value),
        XF=soul.directional(soul.F, X),
        hess_g0=soul.hessian(g0, X),
        hess_g1=soul.hessian(g1, X),
        gauss=soul.gauss,
    )


def hessian_on_soul(model: MetricModel, field, point: ChartPoint, X) -> float:
    """Covariant hessian ``hess f(X, X)`` for the soul's induced metric.

    ``field`` is ``"F"``, ``"g0"``, ``"g1"`` or a callable of the ambient
    sphere point ``(x, y, z)`` that accepts jets.
    """
    soul = soul_jets(model, point)
    X = soul.check_unit(X)
    if isinstance(field, str):
        return soul.hessian(soul.field(field), X)
    us = jets.variables(point.u, 2)
    f = jets.as_jet(field(*stereo_inverse(us[0], us[1], point.chart)), 2)
    return soul.hessian(f, X)


# ---------------------------------------------------------------- the gap


@dataclass
class Prop1Gap:
    lhs: float
    rhs: float
    gap: float
    lhs_normal: float
    rhs_normal: float
    gap_normal: float

    @property
    def difference(self) -> float:
        return self.gap - self.gap_normal


def _orthonormal(g, vecs, tol=1e-8):
    V = np.array(vecs, float)
    gram = V @ g @ V.T
    if np.abs(gram - np.eye(len(V))).max() > tol:
        raise FrameError(f"frame is not orthonormal (Gram error {np.abs(gram - np.eye(len(V))).max():.2e})")


def ambient_gap(packet: CurvaturePacket, X, Y, W, V) -> tuple[float, float]:
    """``(lhs, rhs)`` of the ambient inequality for 5-vectors ``X, Y, W, V``."""
    g = packet.metric
    lhs = packet.DR(X, X, Y, W, V) ** 2
    r = np.einsum("abcd,a,b,c->d", packet.riemann, W, V, X)
    rr = r @ np.linalg.solve(g, r)
    d2 = packet.D2R(X, X, W, V, V, W)
    rhs = (rr + (2.0 / 3.0) * d2) * packet.R(X, Y, Y, X)
    return float(lhs), float(rhs)


def prop1_gap(model: MetricModel, point: ChartPoint, X, Y, W, V, soul: SoulJets | None = None) -> Prop1Gap:
    """Gap for chart 5-vectors: ``X, Y`` tangent to the soul, ``W, V`` normal."""
    soul = soul or soul_jets(model, point)
    pk = soul.packet
    X, Y, W, V = (np.asarray(v, float) for v in (X, Y, W, V))
    if max(np.abs(X[2:]).max(), np.abs(Y[2:]).max(), np.abs(W[:2]).max(), np.abs(V[:2]).max()) > 1e-12:
        raise FrameError("X, Y must be tangent and W, V normal to the soul")
    _orthonormal(pk.metric, [X, Y])
    _orthonormal(pk.metric, [W, V])
    lhs, rhs = ambient_gap(pk, X, Y, W, V)
    x2, y2, w3, v3 = X[:2], Y[:2], W[2:], V[2:]
    lhs_n = float((w3 @ soul.DX_normal(x2, y2) @ v3) ** 2)
    rn = v3 @ soul.normal_matrix(x2, y2) @ w3
    rhs_n = float(soul.gauss * (rn**2 + (2.0 / 3.0) * pk.D2R(X, X, W, V, V, W)))
    return Prop1Gap(lhs, rhs, rhs - lhs, lhs_n, rhs_n, rhs_n - lhs_n)


def gap_form(packet: CurvaturePacket, X, Y) -> np.ndarray:
    """Symmetric 3x3 ``Q`` with ``gap(E1, E2) = n^T Q n`` for ``n = E1 x E2`` (normal frame)."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    g = packet.metric
    DRxxy = np.einsum("eabij,e,a,b->ij", packet.nabla_riemann, X, X, Y)[2:, 2:]
    l = 0.5 * np.einsum("ij,ijk->k", DRxxy, _EPS)
    Rn = np.einsum("ijcd,c->ijd", packet.riemann[2:, 2:], X)
    r = 0.5 * np.einsum("ijd,ijk->kd", Rn, _EPS)
    D = np.einsum("feijkl,f,e->ijkl", packet.nabla2_riemann, X, X)[2:, 2:, 2:, 2:]
    Dm = -0.25 * np.einsum("ijkl,ijm,kln->mn", D, _EPS, _EPS)
    kxy = packet.R(X, Y, Y, X)
    Q = kxy * (r @ np.linalg.solve(g, r.T) + (2.0 / 3.0) * Dm) - np.outer(l, l)
    return 0.5 * (Q + Q.T)


def plane_argmin(soul: SoulJets, X) -> tuple[np.ndarray, float]:
    """Normal ``n`` of the normal 2-plane minimising the gap at ``X``, and the minimum."""
    X2 = soul.check_unit(X)
    _, Y2 = soul.frame(X2)
    Q = gap_form(soul.packet, _lift(X2), _lift(Y2))
    w, v = np.linalg.eigh(Q)
    return v[:, 0], float(w[0])


# ---------------------------------------------------------------- Prop "three"


@dataclass
class PropThree:
    residuals: tuple[float, float, float]
    lhs: tuple[float, float, float]
    rhs: tuple[float, float, float]
    scalars: SoulScalars


def prop_three_residuals(model: MetricModel, point: ChartPoint, X=None, soul: SoulJets | None = None) -> PropThree:
    soul = soul or soul_jets(model, point)
    s = soul_scalars(model, point, X, soul)
    k, F, a, g0, g1 = s.gauss, s.F, s.a, s.g0, s.g1
    lhs = (s.XF**2, a * a * F * F, 0.0)
    rhs = (
        k * (F * F + (2.0 / 3.0) * s.hess_g1 - (4.0 * a * a / 3.0) * (g1 - g0)),
        (2.0 / 3.0) * k * (s.hess_g0 + 2.0 * a * a * (g1 - g0)),
        (2.0 / 3.0) * k * s.hess_g0,
    )
    return PropThree(tuple(r - l for l, r in zip(lhs, rhs)), lhs, rhs, s)


@dataclass
class FrameIdentities:
    """Residuals of the hessian identities and the derivative of the normal curvature."""

    uvvu: float
    wuuw: float
    vwwv: float
    dxr_wv: float
    dxr_wu: float
    dxr_uv: float


def frame_identities(model: MetricModel, point: ChartPoint, X=None, soul: SoulJets | None = None) -> FrameIdentities:
    soul = soul or soul_jets(model, point)
    s = soul_scalars(model, point, X, soul)
    X2 = soul.frame(X)[0] if X is None else soul.check_unit(X)
    _, Y2 = soul.frame(X2)
    W, U, V, _ = soul.normal_frame(X2)
    x = _lift(X2)
    W5, U5, V5 = _lift_normal(W), _lift_normal(U), _lift_normal(V)
    pk = soul.packet
    T = soul.DX_normal(X2, Y2)
    d = s.g1 - s.g0
    return FrameIdentities(
        uvvu=pk.D2R(x, x, U5, V5, V5, U5) - (s.hess_g1 - 2 * s.a**2 * d),
        wuuw=pk.D2R(x, x, W5, U5, U5, W5) - (s.hess_g0 + 2 * s.a**2 * d),
        vwwv=pk.D2R(x, x, V5, W5, W5, V5) - s.hess_g0,
        dxr_wv=float(W @ T @ V),
        dxr_wu=float(W @ T @ U) + s.a * s.F,
        dxr_uv=float(U @ T @ V) - s.XF,
    )


# ---------------------------------------------------------------- nullity field


@dataclass
class NullityField:
    points: np.ndarray  # (n, 3) unit vectors on the sphere
    W: np.ndarray  # (n, 3) normal-frame components
    F: np.ndarray
    indeterminate: np.ndarray
    edges: list[tuple[int, int]] = field(default_factory=list)
    consistency: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kernel_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def all_indeterminate(self) -> bool:
        return bool(np.all(self.indeterminate))


def _tangent_basis(p) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, float)
    e = np.eye(3)[int(np.argmin(np.abs(p)))]
    X = np.cross(e, p)
    X /= np.linalg.norm(X)
    return X, np.cross(p, X)


def _normal_curvature_at(source, p) -> np.ndarray:
    """Skew matrix of the normal curvature on the unit-sphere orthonormal pair at ``p``."""
    X, Y = _tangent_basis(p)
    if isinstance(source, MetricModel):
        pt = soul_point(p)
        pk = curvature_at(source, pt, order=0)
        J = pt.chart_jacobian()
        x2 = np.linalg.lstsq(J, X, rcond=None)[0]
        y2 = np.linalg.lstsq(J, Y, rcond=None)[0]
        return np.einsum("abij,a,b->ji", pk.riemann[:2, :2, 2:, 2:], x2, y2)
    return curvature_closed_form(source, p, X, Y).matrix


def _bundle(source):
    return SoulNormalBundle(source) if isinstance(source, MetricModel) else source


def nullity_section(source, points, neighbours: int = 6) -> NullityField:
    """Unit kernel axes of the normal curvature, sign-synchronised along a spanning tree.

    ``source`` is a :class:`MetricModel` (soul normal bundle) or a connection
    family.  Samples where the curvature vanishes are filled by transport from
    their tree parent and flagged.
    """
    pts = np.array([np.asarray(p, float) / np.linalg.norm(p) for p in points])
    n = len(pts)
    W = np.zeros((n, 3))
    F = np.zeros(n)
    resid = np.zeros(n)
    mats = []
    for k, p in enumerate(pts):
        M = _normal_curvature_at(source, p)
        mats.append(M)
        axis = np.array([M[2, 1], M[0, 2], M[1, 0]])
        F[k] = np.linalg.norm(axis)
        if F[k] > DEGENERATE_F:
            W[k] = axis / F[k]
            resid[k] = np.linalg.norm(M @ W[k])
    indeterminate = F <= DEGENERATE_F
    bundle = _bundle(source)
    if n == 1:
        if indeterminate[0]:
            W[0] = np.eye(3)[0]
        return NullityField(pts, W, F, indeterminate, [], np.ones(0), resid)

    tree = cKDTree(pts)
    k = min(neighbours + 1, n)
    dist, idx = tree.query(pts, k=k)
    rows, cols, vals = [], [], []
    for i in range(n):
        for d, j in zip(dist[i, 1:], idx[i, 1:]):
            rows.append(i)
            cols.append(j)
            vals.append(max(d, 1e-15))
    graph = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    graph = graph.maximum(graph.T)
    mst = minimum_spanning_tree(graph)
    mst = mst + mst.T
    roots = [int(np.argmax(~indeterminate))] if not np.all(indeterminate) else [0]
    if np.all(indeterminate):
        W[0] = np.eye(3)[0]
    edges, consistency = [], []
    visited = np.zeros(n, bool)
    for start in roots + list(range(n)):
        if visited[start]:
            continue
        if indeterminate[start] and not np.any(W[start]):
            W[start] = np.eye(3)[0]
        order, pred = breadth_first_order(mst, start, directed=False, return_predecessors=True)
        visited[order] = True
        for child in order[1:]:
            parent = pred[child]
            arc = GreatCircleArc.between(pts[parent], pts[child])
            moved = transport_along(bundle, [arc], W[parent])
            if indeterminate[child]:
                W[child] = moved / np.linalg.norm(moved)
            elif moved @ W[child] < 0:
                W[child] = -W[child]
            edges.append((int(parent), int(child)))
            consistency.append(float(moved @ W[child]))
    return NullityField(pts, W, F, indeterminate, edges, np.array(consistency), resid)


# ---------------------------------------------------------------- nullity field along soul geodesics


@dataclass
class WAlongGeodesic:
    residual: float
    parallel_flag: bool
    cross_check: float
    samples: int


def lemma_W_residual(model: MetricModel, curve, samples: int = 9) -> WAlongGeodesic:
    """Largest component of ``W''`` orthogonal to ``span{W, W'}`` along a soul geodesic."""
    idx = np.unique(np.linspace(0, len(curve.points) - 1, samples).round().astype(int))
    worst = 0.0
    cross = 0.0
    flagged = False
    for i in idx:
        pt = curve.points[i]
        if not pt.on_soul:
            raise ValueError("lemma_W_residual needs a geodesic on the soul")
        soul = soul_jets(model, pt)
        X = curve.velocities[i][:2]
        X = X / np.sqrt(X @ soul.h @ X)
        W = soul.W.value
        dW = soul.nabla_W(X)
        ddW = soul.nabla2_W(X)
        if np.linalg.norm(dW) <= PARALLEL_W:
            flagged = True
            span = W[:, None]
        else:
            span = np.column_stack([W, dW])
        q, _ = np.linalg.qr(span)
        worst = max(worst, float(np.linalg.norm(ddW - q @ (q.T @ ddW))))
        if not soul.indeterminate:
            s = soul_scalars(model, pt, X, soul)
            Wn, U, V, _ = soul.normal_frame(X)
            x = _lift(X)
            lhs = soul.packet.D2R(x, x, _lift_normal(U), _lift_normal(V), _lift_normal(Wn), _lift_normal(V))
            cross = max(cross, abs(lhs - (s.g1 - s.g0) * float(ddW @ U)))
    return WAlongGeodesic(worst, flagged, cross, len(idx))


# ---------------------------------------------------------------- minimal sectional curvature


@dataclass
class SectionalMin:
    value: float
    plane: np.ndarray  # (2, 5) chart vectors, g-orthonormal
    restarts: int
    failed: int


def _orthonormal_curvature(model: MetricModel, point: ChartPoint, subspace=None, backend: str = "jet"):
    pk = curvature_at(model, point, order=0, backend=backend)
    g = pk.metric
    B = np.eye(5) if subspace is None else np.eye(5)[:, list(subspace)]
    # g-orthonormal basis of the subspace
    L = jets.cholesky(B.T @ g @ B)
    E = B @ np.linalg.inv(L).T
    Rt = np.einsum("abcd,ai,bj,ck,dl->ijkl", pk.riemann, E, E, E, E)
    return Rt, E


class _SectionalForm:
    """``k(x, y) = R(x, y, y, x)`` for an orthonormal-frame curvature tensor, via flattened matvecs."""

    def __init__(self, Rt: np.ndarray):
        m = Rt.shape[0]
        self.m = m
        self.Ay = Rt.transpose(0, 3, 1, 2).reshape(m * m, m * m)  # A_y[a,d] from kron(y, y)
        self.Bx = Rt.transpose(1, 2, 0, 3).reshape(m * m, m * m)  # B_x[b,c] from kron(x, x)

    def value_grad(self, x, y):
        m = self.m
        A = (self.Ay @ np.kron(y, y)).reshape(m, m)
        B = (self.Bx @ np.kron(x, x)).reshape(m, m)
        return float(x @ A @ x), 2.0 * A @ x, 2.0 * B @ y

    def value(self, x, y):
        return float(x @ (self.Ay @ np.kron(y, y)).reshape(self.m, self.m) @ x)


def _qr_frame(Z):
    Q, Rr = np.linalg.qr(Z)
    return Q * np.sign(np.diag(Rr))


def min_sectional(
    model: MetricModel, point: ChartPoint, restarts: int = 8, seed: int = 0, subspace=None, max_iter: int = 500, backend: str = "jet"
) -> SectionalMin:
    """Minimal sectional curvature by Riemannian gradient descent on orthonormal 2-frames."""
    if restarts < 8:
        raise ValueError("use at least 8 restarts")
    Rt, E = _orthonormal_curvature(model, point, subspace, backend)
    form = _SectionalForm(Rt)
    m = Rt.shape[0]
    rng = np.random.default_rng(seed)
    best, best_Z, failed = np.inf, None, 0
    for _ in range(restarts):
        Z = _qr_frame(rng.standard_normal((m, 2)))
        f, gx, gy = form.value_grad(Z[:, 0], Z[:, 1])
        ok = True
        step = 1.0
        for _ in range(max_iter):
            G = np.column_stack([gx, gy])
            G = G - Z @ (0.5 * (Z.T @ G + G.T @ Z))
            gn = float(np.sum(G * G))
            if gn < 1e-22:
                break
            t = min(1.0, 4.0 * step)
            while True:
                Zn = _qr_frame(Z - t * G)
                fn = form.value(Zn[:, 0], Zn[:, 1])
                if fn <= f - 1e-4 * t * gn:
                    break
                t *= 0.5
                if t < 1e-14:
                    break
            if t < 1e-14:
                # no decrease possible at machine precision: accept only a stationary point
                ok = gn < 1e-16
                break
            step = t
            converged = f - fn < 1e-16 * max(1.0, abs(f))
            Z = Zn
            f, gx, gy = form.value_grad(Z[:, 0], Z[:, 1])
            if converged:
                break
        if not ok:
            failed += 1
            continue
        if f < best:
            best, best_Z = f, Z
    if best_Z is None:
        raise OptimizationError("every restart failed its line search")
    return SectionalMin(float(best), (E @ best_Z).T, restarts, failed)


def _jacobi_min(Rt, X):
    """Smallest eigenvalue of ``y -> R(y, x) x`` on ``x^perp`` for rows ``x`` of ``X``."""
    m = Rt.shape[0]
    A = np.einsum("abcd,na,nd->nbc", Rt, X, X)
    out = np.empty(len(X))
    for k, x in enumerate(X):
        # Householder basis of x^perp
        v = x.copy()
        v[0] += np.copysign(1.0, x[0])
        H = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
        P = H[:, 1:]
        out[k] = np.linalg.eigvalsh(P.T @ A[k] @ P)[0]
    return out


def sectional_grid_min(model: MetricModel, point: ChartPoint, samples: int = 20000, seed: int = 0, subspace=None, zoom_levels: int = 5) -> float:
    """Derivative-free reference: sampled first vector, exact inner minimum, zooming resampling."""
    Rt, _ = _orthonormal_curvature(model, point, subspace)
    m = Rt.shape[0]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, m))
    X /= np.linalg.norm(X, axis=1)[:, None]
    vals = _jacobi_min(Rt, X)
    radius = 0.3
    for _ in range(zoom_levels):
        best = X[np.argsort(vals)[:10]]
        cloud = np.repeat(best, 200, axis=0) + radius * rng.standard_normal((2000, m))
        cloud /= np.linalg.norm(cloud, axis=1)[:, None]
        cv = _jacobi_min(Rt, cloud)
        X = np.vstack([best, cloud])
        vals = np.concatenate([np.sort(vals)[:10], cv])
        radius *= 0.25
    return float(vals.min())


# ---------------------------------------------------------------- scan


@dataclass(frozen=True)
class ScanPlan:
    points: int = 50
    normals: int = 20
    frames: int = 40
    seed: int = 0

    def soul_points(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        P = rng.standard_normal((self.points, 3))
        return P / np.linalg.norm(P, axis=1)[:, None]

    def normal_directions(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed + 1)
        N = rng.standard_normal((self.points, self.normals, 3))
        return N / np.linalg.norm(N, axis=2)[..., None]


@dataclass
class GapRecord:
    index: tuple[int, int]
    point: np.ndarray
    normal: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    V: np.ndarray
    lhs: float
    rhs: float
    gap: float


@dataclass
class RigidityReport:
    plan: ScanPlan
    tolerance: float
    records: list[GapRecord]
    minimum: float
    argmin: tuple[int, int]
    quasi_strict: bool
    strict_directions: list[tuple[int, int]]


def min_gap_for_normal(packet: CurvaturePacket, h: np.ndarray, normal, frames: int):
    """Minimum gap over tangent directions and all ``V`` orthogonal to ``normal``.

    The tangent angle is scanned on ``frames`` grid points and the best one is
    polished with a bounded scalar minimisation; the inner minimum over ``V`` is
    exact (smallest eigenvalue of the restricted quadratic form).
    """
    Wt = np.asarray(normal, float)
    Wt = Wt / np.linalg.norm(Wt)
    e = np.eye(3)[int(np.argmin(np.abs(Wt)))]
    b1 = np.cross(Wt, e)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(Wt, b1)
    B = np.column_stack([b1, b2])
    X0, Y0 = oriented_pair(h)

    def inner(phi):
        X = np.cos(phi) * X0 + np.sin(phi) * Y0
        Y = -np.sin(phi) * X0 + np.cos(phi) * Y0
        w, v = np.linalg.eigh(B.T @ gap_form(packet, _lift(X), _lift(Y)) @ B)
        return w[0], X, Y, np.cross(B @ v[:, 0], Wt)

    grid = np.linspace(0.0, np.pi, frames, endpoint=False)
    vals = [inner(phi)[0] for phi in grid]
    k = int(np.argmin(vals))
    d = np.pi / frames
    res = minimize_scalar(lambda phi: inner(phi)[0], bounds=(grid[k] - d, grid[k] + d), method="bounded", options={"xatol": 1e-10})
    phi = res.x if res.fun < vals[k] else grid[k]
    val, X, Y, V = inner(phi)
    return val, (X, Y, V)


def scan_point(soul: SoulJets, index: int, normals, frames: int) -> list[GapRecord]:
    """Minimum gap records for every sampled normal direction at one soul point."""
    pk = soul.packet
    p = soul.point.p
    out = []
    for j, wt in enumerate(normals):
        _, (X, Y, V) = min_gap_for_normal(pk, soul.h, wt, frames)
        lhs, rhs = ambient_gap(pk, _lift(X), _lift(Y), _lift_normal(wt), _lift_normal(V))
        out.append(GapRecord((index, j), p, np.asarray(wt, float), X, Y, V, lhs, rhs, rhs - lhs))
    return out


def summarize_scan(plan: ScanPlan, tolerance: float, records: list[GapRecord]) -> RigidityReport:
    gaps = np.array([r.gap for r in records])
    k = int(np.argmin(gaps))
    strict = [r.index for r in records if r.gap > tolerance]
    return RigidityReport(plan, tolerance, records, float(gaps[k]), records[k].index, bool(strict), strict)


def quasi_strict_scan(model: MetricModel, plan: ScanPlan = ScanPlan(), tolerance: float = 1e-5, souls=None) -> RigidityReport:
    """For each sampled ``(p, normal)``: minimum gap over frames; quasi-strict iff some minimum exceeds ``tolerance``.

    ``souls`` may carry precomputed :func:`soul_jets` for ``plan.soul_points()``.
    """
    records = []
    P = plan.soul_points()
    N = plan.normal_directions()
    for i, p in enumerate(P):
        soul = souls[i] if souls is not None else soul_jets(model, soul_point(p))
        records.extend(scan_point(soul, i, N[i], plan.frames))
    return summarize_scan(plan, tolerance, records)
