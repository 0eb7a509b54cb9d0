"""Levi-Civita curvature pipeline on jets, soul geometry and normal curvature.

Conventions: ``R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z``,
``R(X,Y,Z,W) = <R(X,Y)Z, W>`` and the sectional curvature of an orthonormal
pair is ``R(X,Y,Y,X)`` (so the unit sphere has curvature +1).
Tensor arrays are indexed in that slot order: ``R[a,b,c,d] = R(d_a,d_b,d_c,d_d)``,
``DR[e,a,b,c,d] = (D_e R)_abcd``, ``D2R[f,e,a,b,c,d] = (D^2_{f,e} R)_abcd``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import Jet
from .metrics import ChartPoint, MetricModel, metric_jet

_LETTERS = "abcdefghijkl"


class FrameError(ValueError):
    pass


def restrict(jet: Jet, keep: int) -> Jet:
    """Drop every monomial involving variables ``>= keep`` (restriction to ``x_keep.. = 0``)."""
    mons = jets.monomials(jet.degree)
    mask = np.array([all(e == 0 for e in m[keep:]) for m in mons], float)
    return Jet(jet.c * mask, jet.degree)


def _reindex(jet: Jet, spec: str) -> Jet:
    src, dst = spec.split("->")
    return Jet(np.einsum(f"{src}Z->{dst}Z", jet.c), jet.degree)


def covariant_derivative(T: Jet, gamma: Jet, n: int) -> Jet:
    """``(D_e T)_{a...}`` for a covariant tensor jet; the new index is first."""
    rank = len(T.shape)
    out = jets.stack([T.deriv(e) for e in range(n)])
    idx = _LETTERS[:rank]
    for s in range(rank):
        t_idx = idx[:s] + "m" + idx[s + 1 :]
        out = out - jets.einsum(f"mz{idx[s]},{t_idx}->z{idx}", gamma, T)
    return out


def christoffel(g: Jet, n: int) -> Jet:
    """``G[k,i,j] = Gamma^k_ij``, one degree below ``g``."""
    ginv = jets.inv(g.truncate(g.degree - 1))
    D = jets.stack([g.deriv(l) for l in range(n)])  # D[l,i,j] = d_l g_ij
    comb = _reindex(D, "ijl->lij") + _reindex(D, "jil->lij") - D
    return 0.5 * jets.einsum("kl,lij->kij", ginv, comb)


def riemann(g: Jet, gamma: Jet, n: int) -> Jet:
    dG = jets.stack([gamma.deriv(m) for m in range(n)])  # dG[m,k,i,j]
    A = _reindex(dG, "iljk->lijk")
    C = jets.einsum("lim,mjk->lijk", gamma, gamma)
    up = A - _reindex(A, "ljik->lijk") + C - _reindex(C, "ljik->lijk")
    return jets.einsum("lm,mijk->ijkl", g, up)


def levi_civita(g: Jet, n: int) -> dict:
    """Christoffels and as many covariant derivatives of R as the jet degree allows."""
    out = {"metric": g}
    if g.degree < 1:
        return out
    gamma = christoffel(g, n)
    out["gamma"] = gamma
    if g.degree < 2:
        return out
    R = riemann(g, gamma, n)
    out["R"] = R
    if g.degree >= 3:
        DR = covariant_derivative(R, gamma, n)
        out["DR"] = DR
        if g.degree >= 4:
            out["D2R"] = covariant_derivative(DR, gamma, n)
    return out


# ---------------------------------------------------------------- packets


@dataclass
class CurvaturePacket:
    point: ChartPoint
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    nabla_riemann: np.ndarray | None = None
    nabla2_riemann: np.ndarray | None = None
    X: np.ndarray | None = None

    @property
    def nabla2_along(self) -> np.ndarray | None:
        """``(D^2_{X,X} R)`` as a rank-4 array for the supplied ``X``."""
        if self.nabla2_riemann is None or self.X is None:
            return None
        return np.einsum("feabcd,f,e->abcd", self.nabla2_riemann, self.X, self.X)

    def inner(self, a, b) -> float:
        return float(np.asarray(a) @ self.metric @ np.asarray(b))

    def R(self, a, b, c, d) -> float:
        return float(np.einsum("abcd,a,b,c,d->", self.riemann, a, b, c, d))

    def DR(self, e, a, b, c, d) -> float:
        return float(np.einsum("eabcd,e,a,b,c,d->", self.nabla_riemann, e, a, b, c, d))

    def D2R(self, f, e, a, b, c, d) -> float:
        return float(np.einsum("feabcd,f,e,a,b,c,d->", self.nabla2_riemann, f, e, a, b, c, d))

    def sectional(self, X, Y) -> float:
        return sectional(self.riemann, self.metric, X, Y)

    def curvature_vector(self, a, b, c) -> np.ndarray:
        """Chart components of ``R(a,b)c``."""
        low = np.einsum("abcd,a,b,c->d", self.riemann, a, b, c)
        return np.linalg.solve(self.metric, low)


def sectional(R: np.ndarray, g: np.ndarray, X, Y) -> float:
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    num = np.einsum("abcd,a,b,c,d->", R, X, Y, Y, X)
    den = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    return float(num / den)


def curvature_at(
    model: MetricModel,
    point: ChartPoint,
    X=None,
    order: int | None = None,
    backend: str = "jet",
) -> CurvaturePacket:
    """Curvature data at ``point``.  ``order`` counts covariant derivatives of R (0..2)."""
    if order is None:
        order = 2 if X is not None else 1
    g = metric_jet(model, point, degree=2 + order, backend=backend)
    jets.cholesky(g.value)
    lc = levi_civita(g, 5)
    packet = CurvaturePacket(
        point=point,
        metric=g.value.copy(),
        christoffel=lc["gamma"].value.copy(),
        riemann=lc["R"].value.copy(),
    )
    if order >= 1:
        packet.nabla_riemann = lc["DR"].value.copy()
    if order >= 2:
        packet.nabla2_riemann = lc["D2R"].value.copy()
        if X is not None:
            packet.X = np.asarray(X, float)
    return packet


def christoffel_at(model: MetricModel, point: ChartPoint) -> np.ndarray:
    g = metric_jet(model, point, degree=1)
    return christoffel(g, 5).value


# ---------------------------------------------------------------- soul geometry


@dataclass
class SoulGeometry:
    induced_metric: np.ndarray
    gauss_curvature: float
    second_fundamental_norm: float


def induced_levi_civita(model: MetricModel, point: ChartPoint, degree: int = 4, backend: str = "jet") -> dict:
    """Curvature pipeline of the soul's own induced metric (variables u1, u2)."""
    g = metric_jet(model, point, degree=degree, backend=backend)
    h = restrict(g[:2, :2], 2)
    return levi_civita(h, 2)


def soul_geometry(model: MetricModel, point: ChartPoint, backend: str = "jet") -> SoulGeometry:
    if not point.on_soul:
        raise ValueError("soul_geometry needs a point with V = 0")
    lc = induced_levi_civita(model, point, degree=2, backend=backend)
    h = lc["metric"].value
    R = lc["R"].value
    gauss = float(R[0, 1, 1, 0] / np.linalg.det(h))

    gj = metric_jet(model, point, degree=1, backend=backend)
    G = christoffel(gj, 5).value
    g = gj.value
    tangent = np.eye(5)[:2]
    P = np.linalg.solve(h, tangent @ g)  # 2x5: tangential coefficients of a vector
    II = np.empty((2, 2, 5))
    for a in range(2):
        for b in range(2):
            w = G[:, a, b]
            II[a, b] = w - tangent.T @ (P @ w)
    hinv = np.linalg.inv(h)
    norm2 = np.einsum("ac,bd,abi,ij,cdj->", hinv, hinv, II, g, II)
    return SoulGeometry(h, gauss, float(np.sqrt(max(norm2, 0.0))))


# ---------------------------------------------------------------- normal curvature


def normal_basis(g: np.ndarray, tangent) -> np.ndarray:
    """g-orthonormal basis (rows) of the orthogonal complement of ``tangent`` built from d/dv."""
    tangent = [np.asarray(t, float) for t in tangent]
    out = []
    for i in range(3):
        w = np.zeros(5)
        w[2 + i] = 1.0
        for e in tangent + out:
            w = w - (e @ g @ w) / (e @ g @ e) * e
        out.append(w / np.sqrt(w @ g @ w))
    return np.array(out)


@dataclass
class NormalCurvature:
    """Skew matrix ``M[j,i] = <R(X,Y) n_i, n_j>`` on the normal space in basis ``basis``."""

    matrix: np.ndarray
    basis: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def axis(self) -> np.ndarray:
        """Kernel direction in basis coordinates (``M = [a]_x``), unnormalised."""
        M = self.matrix
        return np.array([M[2, 1], M[0, 2], M[1, 0]])

    def apply(self, w) -> np.ndarray:
        return self.matrix @ np.asarray(w, float)


def normal_curvature(model: MetricModel, point: ChartPoint, X, Y, packet: CurvaturePacket | None = None) -> NormalCurvature:
    if not point.on_soul:
        raise ValueError("normal curvature is defined on the soul")
    if packet is None:
        packet = curvature_at(model, point, order=0)
    g = packet.metric
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if np.abs(X[2:]).max() > 1e-12 or np.abs(Y[2:]).max() > 1e-12:
        raise FrameError("X, Y must be tangent to the soul")
    gram = np.array([[X @ g @ X, X @ g @ Y], [Y @ g @ X, Y @ g @ Y]])
    if np.abs(gram - np.eye(2)).max() > 1e-8:
        raise FrameError("X, Y must be orthonormal")
    return normal_curvature_from(packet, X, Y)


def normal_curvature_from(packet: CurvaturePacket, X, Y) -> NormalCurvature:
    g = packet.metric
    basis = normal_basis(g, [np.eye(5)[0], np.eye(5)[1]])
    B = np.outer(X, Y) - np.outer(Y, X)
    RB = 0.5 * np.einsum("abcd,ab->cd", packet.riemann, B)
    M = basis @ RB @ basis.T  # M[i,j] = R(X,Y,n_i,n_j)
    return NormalCurvature(M.T.copy(), basis)


# ---------------------------------------------------------------- vertical planes


def vertical_plane_curvature(packet: CurvaturePacket, W, U, V, theta: float) -> float:
    """Curvature of the fibre plane at angle ``theta`` from ``W``: ``span{cos W + sin U, V}``."""
    a = np.cos(theta) * np.asarray(W) + np.sin(theta) * np.asarray(U)
    return packet.sectional(a, V)


def vertical_formula(theta):
    """Formula convention: ``3 sin^2 + (3/2) cos^2`` of the plane's angle with the kernel axis."""
    return 3.0 * np.sin(theta) ** 2 + 1.5 * np.cos(theta) ** 2
