"""Geodesics, parallel transport and holonomy of the soul's normal bundle.

Normal-bundle quantities are written in the frame ``d/dv_1, d/dv_2, d/dv_3``
along the soul ``{V = 0}``; this frame is chart independent, so loops may
cross between stereographic charts freely.  A "bundle" here is anything with
``connection_matrix(p, pdot) -> (3, 3)`` giving ``omega`` in
``D_pdot s = ds(pdot) + omega s`` for a curve on the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .curvature import christoffel
from .metrics import ChartPoint, MetricModel, metric_jet, other_chart, stereo, stereo_inverse, stereo_jacobian, transition_jacobian

CHART_SWITCH_RADIUS = 1.25
TOLERANCE = 1e-10


class IntegrationError(RuntimeError):
    pass


class LoopClosureError(ValueError):
    pass


class BranchError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class ChartOverflowError(ValueError):
    pass


# ---------------------------------------------------------------- integrator

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def integrate(rhs, y0, t_end, *, rtol=TOLERANCE, atol=TOLERANCE, h0=None, post_step=None, max_steps=200_000):
    """Adaptive Dormand-Prince integration of ``y' = rhs(t, y)`` from ``t = 0``.

    ``post_step(t, y)`` may replace the state after each accepted step (chart
    switches, re-orthonormalisation).  Returns ``(ts, ys)`` of accepted steps.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    ts, ys = [0.0], [y.copy()]
    if t_end == 0.0:
        return np.array(ts), np.array(ys)
    direction = np.sign(t_end)
    h = direction * (h0 if h0 is not None else min(abs(t_end), 0.05))
    k1 = rhs(t, y)
    steps = 0
    while direction * (t_end - t) > 1e-14 * max(1.0, abs(t_end)):
        if direction * (t + h - t_end) > 0:
            h = t_end - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(rhs(t + _C[i] * h, yi))
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks))
        err = h * sum((b5 - b4) * k for b5, b4, k in zip(_B5, _B4, ks))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if enorm <= 1.0:
            t = t + h
            y = y5
            k1 = ks[6]
            if post_step is not None:
                y_new = post_step(t, y)
                if y_new is not None:
                    y = np.asarray(y_new, float)
                    k1 = rhs(t, y)
            ts.append(t)
            ys.append(y.copy())
            fac = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** (-0.2)))
        else:
            fac = max(0.2, 0.9 * enorm ** (-0.2))
        h = h * fac
        steps += 1
        if abs(h) < 1e-12 * max(1.0, abs(t_end)) or steps > max_steps:
            raise IntegrationError(f"step size collapsed at t={t:.6g}, state={y[:5]}")
    return np.array(ts), np.array(ys)


def project_orthonormal(Q: np.ndarray) -> np.ndarray:
    """Nearest orthogonal matrix (polar factor)."""
    U, _, Vt = np.linalg.svd(Q)
    return U @ Vt


# ---------------------------------------------------------------- geodesics


@dataclass
class Curve:
    """Sampled geodesic: one sample per accepted integration step."""

    model: MetricModel
    start: ChartPoint
    initial_velocity: np.ndarray
    duration: float
    t: np.ndarray
    points: list[ChartPoint]
    velocities: np.ndarray
    switches: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def end(self) -> ChartPoint:
        return self.points[-1]

    def ambient(self) -> tuple[np.ndarray, np.ndarray]:
        """Sphere points and fibre points of all samples."""
        return np.array([pt.p for pt in self.points]), np.array([pt.v for pt in self.points])


def _geodesic_rhs(model: MetricModel, chart_ref: list, nvec: int):
    def rhs(t, y):
        q = y[:5]
        qd = y[5:10]
        G = christoffel(metric_jet(model, ChartPoint(chart_ref[0], tuple(q)), degree=1), 5).value
        out = np.empty_like(y)
        out[:5] = qd
        out[5:10] = -np.einsum("kij,i,j->k", G, qd, qd)
        for n in range(nvec):
            Z = y[10 + 5 * n : 15 + 5 * n]
            out[10 + 5 * n : 15 + 5 * n] = -np.einsum("kij,i,j->k", G, qd, Z)
        return out

    return rhs


def _switch_hook(chart_ref: list, nvec: int, log: list):
    def post(t, y):
        u = y[:2]
        if u @ u <= CHART_SWITCH_RADIUS**2:
            return None
        Jt = transition_jacobian(u)
        y = y.copy()
        y[:2] = u / (u @ u)
        y[5:7] = Jt @ y[5:7]
        for n in range(nvec):
            s = 10 + 5 * n
            y[s : s + 2] = Jt @ y[s : s + 2]
        new = other_chart(chart_ref[0])
        log.append((t, chart_ref[0], new))
        chart_ref[0] = new
        return y

    return post


def _run_geodesic(model, start: ChartPoint, v, T, vectors=()):
    chart_ref = [start.chart]
    log: list = []
    y0 = np.concatenate([start.q, np.asarray(v, float)] + [np.asarray(z, float) for z in vectors])
    rhs = _geodesic_rhs(model, chart_ref, len(vectors))
    # the right-hand side reads the chart from chart_ref, which the hook updates in place
    charts = [start.chart]

    def post(t, y):
        out = hook(t, y)
        charts.append(chart_ref[0])
        return out

    hook = _switch_hook(chart_ref, len(vectors), log)
    ts, ys = integrate(rhs, y0, T, post_step=post)
    return ts, ys, charts, log


def geodesic(model: MetricModel, start: ChartPoint, v, T: float) -> Curve:
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) == 0:
        raise ValueError("initial velocity must be nonzero")
    ts, ys, charts, log = _run_geodesic(model, start, v, T)
    points = [ChartPoint(c, tuple(y[:5])) for c, y in zip(charts, ys)]
    switches = []
    for t_sw, a, b in log:
        switches.append((int(np.searchsorted(ts, t_sw)), a, b))
    return Curve(model, start, v, T, ts, points, ys[:, 5:10], switches)


def geodesic_speed(curve: Curve) -> np.ndarray:
    out = []
    for pt, v in zip(curve.points, curve.velocities):
        g = metric_jet(curve.model, pt, degree=0).value
        out.append(np.sqrt(v @ g @ v))
    return np.array(out)


def geodesic_residual(curve: Curve, window: int = 3) -> float:
    """Max ``|v' + Gamma(v, v)|`` at interior samples, ``v'`` from local polynomial fits."""
    worst = 0.0
    n = len(curve.t)
    switch_idx = {i for i, _, _ in curve.switches}
    for i in range(window, n - window):
        idx = range(i - window, i + window + 1)
        if any(j in switch_idx for j in range(i - window + 1, i + window + 1)):
            continue
        tt = curve.t[list(idx)] - curve.t[i]
        scale = np.abs(tt).max()
        vs = curve.velocities[list(idx)]
        dv = np.array([np.polyfit(tt / scale, vs[:, k], 2 * window)[-2] for k in range(5)]) / scale
        G = christoffel(metric_jet(curve.model, curve.points[i], degree=1), 5).value
        res = dv + np.einsum("kij,i,j->k", G, curve.velocities[i], curve.velocities[i])
        worst = max(worst, float(np.abs(res).max()))
    return worst


# ---------------------------------------------------------------- soul paths and loops


@dataclass(frozen=True)
class GreatCircleArc:
    """Unit-speed arc ``cos t a + sin t e`` for ``0 <= t <= angle`` on the unit sphere."""

    a: tuple[float, float, float]
    e: tuple[float, float, float]
    angle: float

    @classmethod
    def between(cls, a, b) -> "GreatCircleArc":
        a = np.asarray(a, float) / np.linalg.norm(a)
        b = np.asarray(b, float) / np.linalg.norm(b)
        c = float(np.clip(a @ b, -1.0, 1.0))
        w = b - c * a
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            raise ValueError("arc endpoints are equal or antipodal")
        return cls(tuple(a), tuple(w / nw), float(np.arccos(c)))

    @classmethod
    def from_direction(cls, a, direction, angle) -> "GreatCircleArc":
        a = np.asarray(a, float) / np.linalg.norm(a)
        d = np.asarray(direction, float)
        d = d - (d @ a) * a
        return cls(tuple(a), tuple(d / np.linalg.norm(d)), float(angle))

    @property
    def duration(self) -> float:
        return self.angle

    def position(self, t):
        return np.cos(t) * np.array(self.a) + np.sin(t) * np.array(self.e)

    def velocity(self, t):
        return -np.sin(t) * np.array(self.a) + np.cos(t) * np.array(self.e)

    @property
    def axis(self) -> np.ndarray:
        return np.cross(self.a, self.e)


@dataclass(frozen=True)
class ChartLine:
    """Straight segment ``u0 -> u1`` in a stereographic chart, traversed in unit time."""

    chart: str
    u0: tuple[float, float]
    u1: tuple[float, float]

    duration = 1.0

    def _u(self, t):
        u0 = np.array(self.u0)
        return u0 + t * (np.array(self.u1) - u0)

    def position(self, t):
        u = self._u(t)
        return np.array(stereo_inverse(u[0], u[1], self.chart))

    def velocity(self, t):
        u = self._u(t)
        J = np.array(stereo_jacobian(u[0], u[1], self.chart))
        return J @ (np.array(self.u1) - np.array(self.u0))


@dataclass(frozen=True)
class SoulLoop:
    segments: tuple
    label: str = ""
    vertices: tuple = ()

    @property
    def base(self) -> np.ndarray:
        return self.segments[0].position(0.0)

    def closure_error(self) -> float:
        err = 0.0
        segs = self.segments
        for s0, s1 in zip(segs, segs[1:] + segs[:1]):
            err = max(err, float(np.linalg.norm(s0.position(s0.duration) - s1.position(0.0))))
        return err

    def reversed(self) -> "SoulLoop":
        rev = []
        for s in reversed(self.segments):
            if isinstance(s, GreatCircleArc):
                end = s.position(s.angle)
                rev.append(GreatCircleArc.from_direction(end, -s.velocity(s.angle), s.angle))
            else:
                rev.append(ChartLine(s.chart, s.u1, s.u0))
        return SoulLoop(tuple(rev), self.label + " reversed")


def triangle_loop(p, a, b, label="") -> SoulLoop:
    return SoulLoop(
        (GreatCircleArc.between(p, a), GreatCircleArc.between(a, b), GreatCircleArc.between(b, p)),
        label,
        (tuple(p), tuple(a), tuple(b)),
    )


def equator_loop(p, axis) -> SoulLoop:
    """Full great circle through ``p`` turning about ``axis``."""
    p = np.asarray(p, float)
    e = np.cross(np.asarray(axis, float), p)
    return SoulLoop((GreatCircleArc.from_direction(p, e, 2 * np.pi),), "equator")


def chart_rectangle_loop(chart: str, centre, side_a, side_b, h: float) -> SoulLoop:
    """Lasso from ``centre`` around the parallelogram ``centre +- h/2 a +- h/2 b`` (a then b)."""
    c = np.asarray(centre, float)
    a = 0.5 * h * np.asarray(side_a, float)
    b = 0.5 * h * np.asarray(side_b, float)
    corners = [c - a - b, c + a - b, c + a + b, c - a + b]
    if max(np.linalg.norm(x) for x in corners) > 2.0:
        raise ChartOverflowError("rectangle leaves the chart's safe region; reduce h")
    pts = [c] + corners + [corners[0], c]
    segs = tuple(ChartLine(chart, tuple(x), tuple(y)) for x, y in zip(pts, pts[1:]))
    return SoulLoop(segs, f"rectangle h={h:g}")


def loop_basket(base, count: int, seed: int, radius: float = 1.0) -> list[SoulLoop]:
    """Seeded geodesic triangles based at ``base`` with vertices in a cap of angular ``radius``."""
    base = np.asarray(base, float) / np.linalg.norm(base)
    helper = np.eye(3)[int(np.argmin(np.abs(base)))]
    e1 = np.cross(base, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(base, e1)
    pts = qmc.Halton(d=2, scramble=True, seed=seed).random(2 * count)
    verts = []
    for x, y in pts:
        gamma = np.arccos(1.0 - (0.15 + 0.85 * x) * (1.0 - np.cos(radius)))
        phi = 2 * np.pi * y
        verts.append(np.cos(gamma) * base + np.sin(gamma) * (np.cos(phi) * e1 + np.sin(phi) * e2))
    return [triangle_loop(base, verts[2 * i], verts[2 * i + 1], f"triangle {i}") for i in range(count)]


# ---------------------------------------------------------------- bundles


class SoulNormalBundle:
    """Normal bundle of the soul of a metric model, in the ``d/dv`` frame."""

    def __init__(self, model: MetricModel):
        self.model = model

    def omegas(self, point: ChartPoint) -> np.ndarray:
        """``omega[a][j, i] = Gamma^{v_j}_{u_a, v_i}`` at a soul point."""
        G = christoffel(metric_jet(self.model, point, degree=1), 5).value
        return np.array([G[2:, a, 2:] for a in range(2)])

    def connection_matrix(self, p, pdot) -> np.ndarray:
        p = np.asarray(p, float)
        chart = "north" if p[2] >= 0 else "south"
        u = stereo(p, chart)
        pt = ChartPoint(chart, (u[0], u[1], 0.0, 0.0, 0.0))
        J = pt.chart_jacobian()
        udot = np.linalg.solve(J.T @ J, J.T @ np.asarray(pdot, float))
        om = self.omegas(pt)
        return udot[0] * om[0] + udot[1] * om[1]


def transport_along(bundle, segments, Z0, reproject: bool = False) -> np.ndarray:
    """Parallel transport of the columns of ``Z0`` through consecutive segments."""
    Z = np.array(Z0, dtype=float)
    cols = Z.shape[1] if Z.ndim == 2 else 1
    shape = Z.shape
    for seg in segments:

        def rhs(t, y, seg=seg):
            om = bundle.connection_matrix(seg.position(t), seg.velocity(t))
            return -(om @ y.reshape(3, cols)).ravel()

        def reorthonormalise(t, y):
            return project_orthonormal(y.reshape(3, 3)).ravel()

        post = reorthonormalise if reproject and cols == 3 else None
        _, ys = integrate(rhs, Z.reshape(-1), seg.duration, post_step=post)
        Z = ys[-1].reshape(shape)
    return Z


def parallel_transport(model: MetricModel, curve, vector, mode: str = "normal", reproject: bool = False):
    """Transport ``vector`` along ``curve``.

    ``mode="normal"``: ``vector`` holds fibre components (3, or 3xk) and the curve
    must lie on the soul; the result is in the same frame.  ``mode="ambient"``:
    ``vector`` holds chart components (5, or 5xk) and ``curve`` is a geodesic
    :class:`Curve`; the result is in the chart of the final point.
    """
    if mode == "normal":
        if isinstance(curve, Curve):
            if any(np.abs(pt.v).max() > 1e-9 for pt in curve.points):
                raise DomainError("normal transport needs a curve on the soul")
            segments = [_SampledGeodesicSegment(curve)]
        else:
            segments = curve.segments
        return transport_along(SoulNormalBundle(model), segments, vector, reproject)
    if mode == "ambient":
        if not isinstance(curve, Curve):
            raise ValueError("ambient transport is along geodesic curves")
        vecs = np.asarray(vector, float)
        single = vecs.ndim == 1
        cols = [vecs] if single else list(vecs.T)
        ts, ys, charts, _ = _run_geodesic(model, curve.start, curve.initial_velocity, curve.duration, cols)
        out = np.array([ys[-1][10 + 5 * n : 15 + 5 * n] for n in range(len(cols))])
        return out[0] if single else out.T
    raise ValueError(f"unknown transport mode {mode!r}")


class _SampledGeodesicSegment:
    """A soul geodesic re-integrated on demand so transport can query any time."""

    def __init__(self, curve: Curve):
        self.curve = curve
        self.duration = curve.duration

    def _state(self, t):
        ts, ys, charts, _ = _run_geodesic(self.curve.model, self.curve.start, self.curve.initial_velocity, t)
        pt = ChartPoint(charts[-1], tuple(ys[-1][:5]))
        return pt, ys[-1][5:10]

    def position(self, t):
        return self._state(t)[0].p

    def velocity(self, t):
        pt, v = self._state(t)
        return pt.chart_jacobian() @ v[:2]


# ---------------------------------------------------------------- holonomy


@dataclass
class HolonomyElement:
    matrix: np.ndarray
    loop: str

    @property
    def angle(self) -> float:
        return float(np.arccos(np.clip((np.trace(self.matrix) - 1.0) / 2.0, -1.0, 1.0)))

    @property
    def orthogonality_error(self) -> float:
        return float(np.abs(self.matrix.T @ self.matrix - np.eye(3)).max())


def holonomy_loop(bundle, loop: SoulLoop, reproject: bool = True, closure_tol: float = 1e-8) -> HolonomyElement:
    if isinstance(bundle, MetricModel):
        bundle = SoulNormalBundle(bundle)
    if loop.closure_error() > closure_tol:
        raise LoopClosureError(f"loop {loop.label!r} is open by {loop.closure_error():.3e}")
    Q = transport_along(bundle, loop.segments, np.eye(3), reproject=reproject)
    return HolonomyElement(Q, loop.label)


def so3_log(Q: np.ndarray, branch_margin: float = 1e-2) -> np.ndarray:
    """Axis-angle vector of a rotation; raises :class:`BranchError` near angle pi."""
    c = np.clip((np.trace(Q) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(c))
    if theta < 1e-12:
        return np.zeros(3)
    if np.pi - theta < branch_margin:
        raise BranchError(f"rotation angle {theta:.6f} is too close to pi for a unique logarithm")
    A = (Q - Q.T) / (2.0 * np.sin(theta))
    return theta * np.array([A[2, 1], A[0, 2], A[1, 0]])


def hat(w) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def _shrink(loop: SoulLoop) -> SoulLoop:
    if len(loop.vertices) != 3:
        raise BranchError("cannot subdivide a loop that is not a triangle")
    p, a, b = (np.array(v) for v in loop.vertices)

    def mid(x, y):
        m = x + y
        return m / np.linalg.norm(m)

    return triangle_loop(p, mid(p, a), mid(p, b), loop.label + " (subdivided)")


@dataclass
class HolonomyAlgebra:
    dimension: int
    basis: list[np.ndarray]
    singular_values: np.ndarray
    logs: list[np.ndarray]


def holonomy_algebra(bundle, loops, threshold: float = 1e-5) -> HolonomyAlgebra:
    """Dimension of the Lie algebra generated by the logarithms of loop holonomies."""
    if isinstance(bundle, MetricModel):
        bundle = SoulNormalBundle(bundle)
    logs = []
    for loop in loops:
        for _ in range(5):
            try:
                logs.append(so3_log(holonomy_loop(bundle, loop).matrix))
                break
            except BranchError:
                loop = _shrink(loop)
        else:
            raise BranchError(f"no usable logarithm for loop {loop.label!r}")
    vecs = np.array(logs) if logs else np.zeros((0, 3))
    dim = -1
    sv = np.zeros(0)
    while True:
        if len(vecs) == 0:
            basis = np.zeros((0, 3))
            sv = np.zeros(0)
        else:
            _, sv, Vt = np.linalg.svd(vecs)
            basis = Vt[: int(np.sum(sv > threshold))]
        if len(basis) == dim or len(basis) == 3:
            break
        dim = len(basis)
        brackets = [np.cross(x, y) for i, x in enumerate(basis) for y in basis[i + 1 :]]
        vecs = np.vstack([vecs] + [np.atleast_2d(b) for b in brackets]) if brackets else vecs
    return HolonomyAlgebra(len(basis), [hat(b) for b in basis], sv, logs)


def rotation(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    K = hat(axis)
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
