"""Verification suites for the SO(3) example, the connection family and the rigidity functionals.

Every suite appends :class:`Check` records (and optionally tables) to a
:class:`Report`.  Sampling is seeded per stream, work items are generated up
front and mapped in order, so the report does not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import jets
from .config import SuiteConfig
from .connection import (
    BaseMap,
    ConnectionFamily,
    covariant_derivative,
    curvature_closed_form,
    curvature_from_connection,
    curvature_via_loops,
    lambda_sweep,
    transport_section_deviation,
)
from .curvature import curvature_at, levi_civita, normal_curvature, soul_geometry, vertical_formula, vertical_plane_curvature
from .jets import Jet
from .metrics import (
    ChartPoint,
    MetricModel,
    closed_form_coordinate_metric,
    frame_coordinates,
    horizontal_space,
    killing_fields,
    killing_gram,
    metric_at,
)
from .report import Check, Report, indeterminate, table
from .rigidity import (
    ScanPlan,
    frame_identities,
    lemma_W_residual,
    min_sectional,
    nullity_section,
    oriented_pair,
    plane_argmin,
    prop1_gap,
    prop_three_residuals,
    scan_point,
    sectional_grid_min,
    soul_jets,
    soul_point,
    soul_scalars,
    summarize_scan,
)
from .transport import (
    SoulNormalBundle,
    chart_rectangle_loop,
    equator_loop,
    geodesic,
    hat,
    holonomy_algebra,
    holonomy_loop,
    loop_basket,
    rotation,
    so3_log,
)

STREAMS = {
    "soul": 1,
    "frame": 2,
    "normal": 3,
    "holonomy": 4,
    "vertical": 5,
    "connection": 6,
    "rigidity": 7,
    "geodesic": 8,
    "nullity": 9,
    "sectional": 10,
    "backend": 11,
}

LOOP_STEP = 0.05


@dataclass
class Context:
    config: SuiteConfig
    workers: int = 1

    @property
    def seed(self) -> int:
        return 0 if self.config.seed is None else int(self.config.seed)

    @property
    def tol(self):
        return self.config.tolerances

    @property
    def samples(self):
        return self.config.samples

    @property
    def backends(self) -> list[str]:
        return ["jet", "fd"] if self.config.backend == "both" else [self.config.backend]

    def model(self, family: str | None = None) -> MetricModel:
        return MetricModel(family or self.config.family, self.config.cheeger.scale, tuple(self.config.warp.coefficients))

    @property
    def cheeger(self) -> MetricModel:
        return self.model("cheeger_so3")

    @property
    def product(self) -> MetricModel:
        return self.model("product")

    def rng(self, stream: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, STREAMS[stream]])

    def map(self, fn, items) -> list:
        return parallel_map(fn, items, self.workers)

    def base_map(self) -> BaseMap:
        c = self.config.connection
        R = rotation(c.rotation_axis, c.rotation_angle)
        return BaseMap(c.base_map, tuple(map(tuple, R)), c.dilation)


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; a process pool when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def unit_vectors(rng: np.random.Generator, n: int, dim: int = 3) -> np.ndarray:
    X = rng.standard_normal((n, dim))
    return X / np.linalg.norm(X, axis=1)[:, None]


def tangent_pair(rng: np.random.Generator, p) -> tuple[np.ndarray, np.ndarray]:
    """Random orthonormal pair tangent to the unit sphere at ``p``."""
    p = np.asarray(p, float)
    X = rng.standard_normal(3)
    X -= (X @ p) * p
    X /= np.linalg.norm(X)
    return X, np.cross(p, X)


def _worst(values, target: float) -> float:
    values = np.asarray(values, float)
    return float(values[int(np.argmax(np.abs(values - target)))])


def _lift(x2) -> np.ndarray:
    return np.r_[np.asarray(x2, float), 0.0, 0.0, 0.0]


def _lift_normal(e3) -> np.ndarray:
    return np.r_[0.0, 0.0, np.asarray(e3, float)]


def _soul_direction(h, angle: float) -> tuple[np.ndarray, np.ndarray]:
    X0, Y0 = oriented_pair(h)
    return np.cos(angle) * X0 + np.sin(angle) * Y0, -np.sin(angle) * X0 + np.cos(angle) * Y0


def _suffix(ctx: Context, backend: str) -> str:
    return "" if len(ctx.backends) == 1 else f"[{backend}]"


# ---------------------------------------------------------------- soul curvature


def _gauss_item(args):
    model, p, backend = args
    sg = soul_geometry(model, soul_point(p), backend)
    return sg.gauss_curvature, sg.second_fundamental_norm


def suite_soul_curvature(ctx: Context, report: Report) -> None:
    model = ctx.cheeger
    pts = unit_vectors(ctx.rng("soul"), ctx.samples.soul_points)
    for backend in ctx.backends:
        sfx = _suffix(ctx, backend)
        out = np.array(ctx.map(_gauss_item, [(model, p, backend) for p in pts]))
        K, II = out[:, 0], out[:, 1]
        report.add(Check(f"C1.gauss{sfx}", "soul Gauss curvature", 2.0, _worst(K, 2.0), ctx.tol.gauss))
        spread = float(np.std(K, ddof=1)) if len(K) > 1 else 0.0
        report.add(Check(f"C1.gauss_spread{sfx}", "soul Gauss curvature is constant", 0.0, spread, ctx.tol.gauss_spread, "le"))
        report.add(Check(f"C1.second_fundamental{sfx}", "soul is totally geodesic", 0.0, float(II.max()), ctx.tol.second_fundamental, "le"))


# ---------------------------------------------------------------- frame metric, fibre metric, horizontal space


def _frame_item(args):
    model, p, w, theta = args
    pt = ChartPoint.from_ambient(p, np.cos(theta) * p + np.sin(theta) * w)
    g = metric_at(model, pt)
    try:
        cheeger = float(np.abs(closed_form_coordinate_metric(pt, model) - g).max())
    except ValueError:
        cheeger = None
    F = frame_coordinates(pt)
    G = F.T @ g @ F
    H = horizontal_space(model, pt)
    horiz = float(np.abs(H @ g @ F[:, 2:]).max())
    return cheeger, float(G[2, 2]), float(G[3, 3]), horiz


def _killing_item(args):
    model, theta = args
    c, s = np.cos(theta), np.sin(theta)
    pt = ChartPoint.from_ambient([0.0, 1.0, 0.0], [0.0, c, -s])
    T = killing_fields(pt)
    return float(np.abs(T.T @ metric_at(model, pt) @ T - killing_gram(theta, model.scale)[1]).max())


def theta_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, np.pi, n + 2)[1:-1]


def suite_frame_metric(ctx: Context, report: Report) -> None:
    model = ctx.cheeger
    rng = ctx.rng("frame")
    p = unit_vectors(rng, 1)[0]
    w, _ = tangent_pair(rng, p)
    thetas = theta_grid(ctx.samples.theta_grid)
    rows = ctx.map(_frame_item, [(model, p, w, t) for t in thetas])
    cheeger = [r[0] for r in rows]
    if any(c is None for c in cheeger):
        report.add(indeterminate("C2.closed_form", "Cheeger matrix closed form", 0.0, ctx.tol.cheeger_matrix, "closed form only covers scale 1"))
    else:
        report.add(Check("C2.closed_form", "Cheeger matrix closed form", 0.0, max(cheeger), ctx.tol.cheeger_matrix, "le"))
    kg = ctx.map(_killing_item, [(model, t) for t in thetas])
    report.add(Check("C2.killing_gram", "orbit Gram matrix sK(sI+K)^-1", 0.0, max(kg), ctx.tol.cheeger_matrix, "le"))

    pt = ChartPoint.from_ambient([0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
    T = killing_fields(pt)
    block = T.T @ metric_at(model, pt) @ T
    target = np.diag([2.0 / 3.0, 0.5, 0.5])
    report.add(Check("C2.killing_block", "Killing block at theta=pi/2", 0.0, float(np.abs(block - target).max()), ctx.tol.killing_block, "le"))
    closed = killing_gram(np.pi / 2, model.scale)[1]
    report.add(Check("C2.killing_block_closed", "Killing block at theta=pi/2, closed form", 0.0, float(np.abs(closed - target).max()), ctx.tol.killing_block, "le"))

    YY = np.array([r[1] for r in rows])
    BB = np.array([r[2] for r in rows])
    report.add(Check("C3.YY", "fibre metric <Y,Y> = 2/3", 0.0, float(np.abs(YY - 2.0 / 3.0).max()), ctx.tol.fibre_metric, "le"))
    bb = 2.0 / (4.0 - np.cos(thetas) ** 2)
    report.add(Check("C3.BB", "fibre metric <B,B> = 2/(4-cos^2)", 0.0, float(np.abs(BB - bb).max()), ctx.tol.fibre_metric, "le"))
    report.add(Check("C4.horizontal", "horizontal vectors orthogonal to Y, B, r", 0.0, max(r[3] for r in rows), ctx.tol.horizontal, "le"))


# ---------------------------------------------------------------- normal curvature


def _normal_item(args):
    model, p, backend = args
    pt = soul_point(p)
    pk = curvature_at(model, pt, order=0, backend=backend)
    X, Y = oriented_pair(pk.metric[:2, :2])
    nc = normal_curvature(model, pt, _lift(X), _lift(Y), pk)
    coeff = nc.basis @ pk.metric @ _lift_normal(p)
    return nc.norm, float(np.linalg.norm(nc.apply(coeff)))


def loop_error(model: MetricModel, p, h: float) -> float:
    """Relative operator-norm error of ``-log(hol)/h^2`` against the normal curvature."""
    pt = soul_point(p)
    soul = soul_jets(model, pt)
    X, Y = soul.frame()
    M = soul.normal_matrix(X, Y)
    Q = holonomy_loop(model, chart_rectangle_loop(pt.chart, pt.u, X, Y, h)).matrix
    est = -hat(so3_log(Q)) / h**2
    return float(np.linalg.norm(est - M, 2) / np.linalg.norm(M, 2))


def suite_normal_curvature(ctx: Context, report: Report) -> None:
    model = ctx.model()
    flat = model.family == "product"
    target = 0.0 if flat else 1.5
    pts = unit_vectors(ctx.rng("normal"), ctx.samples.soul_points)
    for backend in ctx.backends:
        sfx = _suffix(ctx, backend)
        out = np.array(ctx.map(_normal_item, [(model, p, backend) for p in pts]))
        report.add(Check(f"C5.norm{sfx}", "normal curvature operator norm", target, _worst(out[:, 0], target), ctx.tol.normal_norm))
        report.add(Check(f"C5.kernel{sfx}", "normal curvature kills the position vector", 0.0, float(out[:, 1].max()), ctx.tol.kernel, "le"))
    if flat:
        report.add(Check("C5.loop", "small-loop holonomy oracle", None, "flat", 0.0, "info", note="no curvature to compare against"))
        return
    p = pts[0]
    e1 = loop_error(model, p, LOOP_STEP)
    e2 = loop_error(model, p, LOOP_STEP / 2)
    report.add(Check("C5.loop", "small-loop holonomy oracle, relative error", 0.0, e1, ctx.tol.loop_relative, "le"))
    order = float(np.log2(e1 / e2)) if e2 > 0 else float("inf")
    report.add(Check("C5.loop_order", "small-loop convergence order", 2.0, order, ctx.tol.loop_order, "ge"))


# ---------------------------------------------------------------- holonomy


def _axis(Q: np.ndarray) -> np.ndarray:
    return np.linalg.svd(Q - np.eye(3))[2][-1]


def suite_holonomy(ctx: Context, report: Report) -> None:
    model = ctx.model()
    flat = model.family == "product"
    base = unit_vectors(ctx.rng("holonomy"), 1)[0]
    loops = loop_basket(base, ctx.samples.loops, ctx.seed, ctx.samples.loop_radius)
    alg = holonomy_algebra(model, loops)
    report.add(Check("C6.dimension", "normal holonomy algebra dimension", 0 if flat else 3, alg.dimension, 0, "eq"))
    pole = np.array([0.0, 0.0, 1.0])
    Q = holonomy_loop(model, equator_loop([1.0, 0.0, 0.0], pole))
    angle = float(np.arccos(np.clip((np.trace(Q.matrix) - 1.0) / 2.0, -1.0, 1.0)))
    report.add(Check("C6.equator_angle", "equator holonomy angle (half speed)", 0.0 if flat else np.pi, angle, ctx.tol.holonomy_angle))
    if not flat:
        report.add(Check("C6.equator_axis", "equator holonomy axis is the pole", 0.0, float(np.linalg.norm(np.cross(_axis(Q.matrix), pole))), ctx.tol.holonomy_angle, "le"))
        control = holonomy_algebra(ctx.product, loops)
        report.add(Check("C6.product_dimension", "product metric control", 0, control.dimension, 0, "eq"))


# ---------------------------------------------------------------- vertical curvature


def fibre_expansion_curvature(p, scale: float = 1.0, warp=()) -> np.ndarray:
    """Fibre curvature at ``V = 0`` from the quadratic expansion of the quotient metric.

    To second order in ``V`` the fibre metric at the soul point ``p`` is
    ``I + c1 (|V|^2 I - V V^T) - [V x]^T (sI + I - p p^T)^{-1} [V x]``;
    its curvature is evaluated with the 5-variable pipeline on a flat
    ``du`` factor.  Indices refer to the fibre coordinates.
    """
    p = np.asarray(p, float) / np.linalg.norm(p)
    xs = jets.variables(np.zeros(5), 2)
    V = xs[2:]
    zero = Jet.constant(0.0, 2)
    C = jets.stack([jets.stack([zero, -V[2], V[1]]), jets.stack([V[2], zero, -V[0]]), jets.stack([-V[1], V[0], zero])])
    M = np.linalg.inv((scale + 1.0) * np.eye(3) - np.outer(p, p))
    h = jets.einsum("ki,kj->ij", C, jets.einsum("kl,lj->kj", M, C)) * -1.0 + np.eye(3)
    c1 = float(warp[0]) if len(warp) else 0.0
    if c1:
        rho = V[0] * V[0] + V[1] * V[1] + V[2] * V[2]
        h = h + c1 * (jets.stack([jets.stack([rho * float(i == j) - V[i] * V[j] for j in range(3)]) for i in range(3)]))
    c = np.zeros((5, 5, jets.ncoef(2)))
    c[:2, :2, 0] = np.eye(2)
    c[2:, 2:] = h.c
    return levi_civita(Jet(c, 2), 5)["R"].value[2:, 2:, 2:, 2:]


def _fibre_sectional(R, a, b) -> float:
    num = np.einsum("abcd,a,b,c,d->", R, a, b, b, a)
    return float(num / ((a @ a) * (b @ b) - (a @ b) ** 2))


def suite_vertical(ctx: Context, report: Report) -> None:
    model = ctx.cheeger
    rng = ctx.rng("vertical")
    p = unit_vectors(rng, 1)[0]
    pt = soul_point(p)
    soul = soul_jets(model, pt)
    X, _ = _soul_direction(soul.h, rng.uniform(0.0, 2 * np.pi))
    W, U, V, _ = soul.normal_frame(X)
    pk = soul.packet
    W5, U5, V5 = _lift_normal(W), _lift_normal(U), _lift_normal(V)

    thetas = np.linspace(0.0, np.pi / 2, ctx.samples.theta_grid)
    ks = np.array([vertical_plane_curvature(pk, W5, U5, V5, t) for t in thetas])
    report.add(Check("C7.theta_grid", "vertical curvature 3sin^2+(3/2)cos^2", 0.0, float(np.abs(ks - vertical_formula(thetas)).max()), ctx.tol.vertical, "le"))
    report.tables["theta_grid"] = table(("theta", "k_vertical"), zip(thetas, ks))

    planes = unit_vectors(rng, 2 * ctx.samples.vertical_planes).reshape(-1, 2, 3)
    dev = 0.0
    for a, b in planes:
        b = b - (b @ a) * a
        b /= np.linalg.norm(b)
        n = np.cross(a, b)
        cos2 = 1.0 - (n @ W) ** 2
        theta = np.arccos(np.sqrt(np.clip(cos2, 0.0, 1.0)))
        dev = max(dev, abs(pk.sectional(_lift_normal(a), _lift_normal(b)) - vertical_formula(theta)))
    report.add(Check("C7.random_planes", "every vertical plane lies on the formula", 0.0, float(dev), ctx.tol.vertical, "le"))

    Rf = fibre_expansion_curvature(p, model.scale, model.warp)
    k_w = _fibre_sectional(Rf, W, V)
    k_perp = _fibre_sectional(Rf, U, V)
    report.add(Check("C7.extreme_min", "W-containing plane curvature (expansion oracle)", 1.5, k_w, ctx.tol.vertical))
    report.add(Check("C7.extreme_max", "W-orthogonal plane curvature (expansion oracle)", 3.0, k_perp, ctx.tol.vertical))
    engine = max(abs(pk.sectional(W5, V5) - k_w), abs(pk.sectional(U5, V5) - k_perp))
    report.add(Check("C7.oracle_agreement", "curvature engine vs expansion oracle", 0.0, engine, ctx.tol.vertical, "le"))
    report.add(Check("C7.range", "vertical curvatures fill [3/2, 3]", [1.5, 3.0], [float(ks.min()), float(ks.max())], 0.0, "info"))
    report.add(
        Check(
            "C7.convention",
            "angle convention of the vertical formula",
            "theta from W",
            "theta from W" if k_w < k_perp else "theta from W-perp",
            0.0,
            "info",
            note="theta is the angle between the plane and the kernel axis W: theta=0 gives 3/2, theta=pi/2 gives 3; "
            "measuring theta from the W-orthogonal plane swaps the extremes",
        )
    )


# ---------------------------------------------------------------- connection family


def _lambda_item(args):
    family, p, X, Y = args
    fp = family.base_map(p)
    closed = curvature_closed_form(family, p, X, Y)
    F = curvature_from_connection(family, p, X, Y)
    expected = (1.0 + family.lam) * family.pushforward(p, X)
    dxw = covariant_derivative(family, p, X, family.base_map._formula)
    return {
        "norm": float(np.linalg.norm(F, 2)),
        "closed": closed.norm,
        "matrix": float(np.abs(F - closed.matrix).max()),
        "kernel": float(np.linalg.norm(F @ fp)),
        "dxw": float(np.linalg.norm(dxw - expected)),
    }


def _sweep_item(args):
    base_map, lam, p, X, Y, loops, seed = args
    return lambda_sweep(base_map, [lam], p, X, Y, loops, seed)[0]


def lambda_grid(n: int) -> np.ndarray:
    return np.round(np.linspace(-3.0, 1.0, n), 12)


def suite_connection(ctx: Context, report: Report) -> None:
    bm = ctx.base_map()
    rng = ctx.rng("connection")
    p = unit_vectors(rng, 1)[0]
    X, Y = tangent_pair(rng, p)
    lams = lambda_grid(ctx.samples.lambda_grid)
    fams = [ConnectionFamily(bm, float(l)) for l in lams]
    rows = ctx.map(_lambda_item, [(f, p, X, Y) for f in fams])
    Xb, Yb = fams[0].pushforward(p, X), fams[0].pushforward(p, Y)
    wedge = np.sqrt(max((Xb @ Xb) * (Yb @ Yb) - (Xb @ Yb) ** 2, 0.0))
    norms = np.array([r["norm"] for r in rows])
    formula = np.abs(lams**2 + 2 * lams) * wedge
    tol = ctx.tol.connection_norm
    report.add(Check("C8.norm", "|R| = |lam^2+2lam| |X^Y|", 0.0, float(np.abs(norms - formula).max()), tol, "le"))
    report.add(Check("C8.closed_form", "curvature from the connection equals the closed form", 0.0, max(r["matrix"] for r in rows), tol, "le"))
    report.add(Check("C8.kernel", "curvature annihilates f(p)", 0.0, max(r["kernel"] for r in rows), tol, "le"))
    flat = [float(l) for l, n in zip(lams, norms) if n <= tol]
    report.add(Check("C8.flat_points", "flat members of the family", [-2.0, 0.0], flat, 0, "eq"))
    sym = [abs(n - norms[j]) for i, n in enumerate(norms) for j in np.flatnonzero(np.isclose(lams, -2.0 - lams[i]))]
    report.add(Check("C8.symmetry", "lam and -2-lam have equal curvature", 0.0, float(max(sym)) if sym else 0.0, tol, "le"))
    report.add(Check("C8.DXW", "covariant derivative of f is (1+lam) df(X)", 0.0, max(r["dxw"] for r in rows), ctx.tol.derivative_identity, "le"))

    half = ConnectionFamily(bm, -0.5)
    est = curvature_via_loops(half, p, X, Y, LOOP_STEP)
    ref = curvature_closed_form(half, p, X, Y).matrix
    report.add(Check("C8.loop", "small-loop oracle at lam=-1/2", 0.0, float(np.linalg.norm(est - ref, 2) / np.linalg.norm(ref, 2)), ctx.tol.loop_relative, "le"))

    minus = ConnectionFamily(bm, -1.0)
    basket = loop_basket(p, ctx.samples.loops, ctx.seed, ctx.samples.loop_radius)
    dev = max(transport_section_deviation(minus, lp) for lp in basket)
    report.add(Check("C8.parallel_section", "f is parallel at lam=-1", 0.0, dev, ctx.tol.parallel_transport, "le"))
    report.add(Check("C8.dimension_minus_one", "holonomy dimension at lam=-1", 1, holonomy_algebra(minus, basket).dimension, 0, "eq"))

    cheeger = SoulNormalBundle(ctx.cheeger)
    ident = ConnectionFamily(BaseMap(), -0.5)
    diff = 0.0
    for q in unit_vectors(rng, 5):
        v, _ = tangent_pair(rng, q)
        diff = max(diff, float(np.abs(cheeger.connection_matrix(q, v) - ident.connection_matrix(q, v)).max()))
    report.add(Check("C8.cheeger_member", "soul normal connection is the identity map member at lam=-1/2", 0.0, diff, tol, "le"))

    sweep = ctx.map(_sweep_item, [(bm, float(l), p, X, Y, ctx.samples.loops, ctx.seed) for l in lams])
    report.tables["lambda_sweep"] = table(("lambda", "curvature_norm", "holonomy_dim"), [(r.lam, r.curvature_norm, r.holonomy_dim) for r in sweep])
    zero = [r for r in sweep if r.lam == 0.0]
    if zero:
        report.add(Check("C8.sweep_flat_row", "lam=0 row is flat", [0.0, 0], [zero[0].curvature_norm, zero[0].holonomy_dim], 0, "eq"))
    report.add(Check("C8.sweep_dimensions", "holonomy dimensions across the sweep", None, sorted({r.holonomy_dim for r in sweep}), 0.0, "info"))


# ---------------------------------------------------------------- rigidity


def _scan_item(args):
    model, p, index, normals, frames = args
    return scan_point(soul_jets(model, soul_point(p)), index, normals, frames)


def _scalar_item(args):
    model, p, angle = args
    pt = soul_point(p)
    soul = soul_jets(model, pt)
    X, Y = _soul_direction(soul.h, angle)
    s = soul_scalars(model, pt, X, soul)
    W, U, V, _ = soul.normal_frame(X)
    three = prop_three_residuals(model, pt, X, soul)
    ids = frame_identities(model, pt, X, soul)
    n, _ = plane_argmin(soul, X)
    gap = prop1_gap(model, pt, _lift(X), _lift(Y), _lift_normal(W), _lift_normal(V), soul)
    return {
        "F": s.F,
        "a": s.a,
        "g0": s.g0,
        "g1": s.g1,
        "hess_g0": s.hess_g0,
        "G_WV": soul.G(X, W, V),
        "G_UV": soul.G(X, U, V),
        "three": three.residuals,
        "identities": (ids.uvvu, ids.wuuw, ids.vwwv, ids.dxr_wv, ids.dxr_wu, ids.dxr_uv),
        "argmin": float((n @ W) ** 2),
        "difference": abs(gap.difference),
    }


def _geodesic_item(args):
    model, p, angle, samples = args
    pt = soul_point(p)
    h = metric_at(model, pt)[:2, :2]
    X, _ = _soul_direction(h, angle)
    curve = geodesic(model, pt, _lift(X), np.pi)
    res = lemma_W_residual(model, curve, samples)
    return res.residual, res.cross_check, res.parallel_flag


def run_scan(ctx: Context, model: MetricModel):
    s = ctx.samples
    plan = ScanPlan(s.soul_points, s.normals, s.frames, ctx.seed)
    P, N = plan.soul_points(), plan.normal_directions()
    parts = ctx.map(_scan_item, [(model, p, i, N[i], plan.frames) for i, p in enumerate(P)])
    return summarize_scan(plan, ctx.tol.gap, [r for part in parts for r in part])


def suite_rigidity(ctx: Context, report: Report) -> None:
    model = ctx.model()
    tol = ctx.tol
    scan = run_scan(ctx, model)
    report.add(Check("C9.scan_min", "gap is nonnegative over the scan plan", 0.0, scan.minimum, tol.gap, "ge"))
    worst = max(r.gap for r in scan.records)
    report.add(Check("C9.scan_max", "every normal direction has a vanishing minimum gap", 0.0, worst, tol.gap, "le"))
    report.add(Check("C9.quasi_strict", "scan verdict: quasi-strict", False, scan.quasi_strict, 0, "eq"))
    if model.family == "product":
        report.add(
            Check("C9.holonomy_trivial", "normal holonomy is trivial", None, "flat", 0.0, "info", note="nullity direction undefined; soul scalars skipped")
        )
        return

    rng = ctx.rng("rigidity")
    n = ctx.samples.soul_points
    pts = unit_vectors(rng, n)
    angles = rng.uniform(0.0, 2 * np.pi, n)
    rows = ctx.map(_scalar_item, [(model, p, a) for p, a in zip(pts, angles)])
    col = lambda k: np.array([r[k] for r in rows])  # noqa: E731
    for key, target in (("F", 1.5), ("a", 1.0 / np.sqrt(2.0)), ("g0", 1.5), ("g1", 3.0)):
        report.add(Check(f"C9.{key}", f"soul scalar {key}", target, _worst(col(key), target), tol.scalars))
    report.add(Check("C9.hess_g0", "g0 is constant on the soul", 0.0, _worst(col("hess_g0"), 0.0), tol.scalars))
    report.add(Check("C9.G_WV", "gap functional on span{W,V}", 0.0, _worst(col("G_WV"), 0.0), tol.gap))
    report.add(Check("C9.G_UV", "gap functional on span{U,V}", 2.5, _worst(col("G_UV"), 2.5), tol.functional))
    three = np.array([r["three"] for r in rows])
    for k, target in enumerate((2.5, 0.875, 0.0)):
        report.add(Check(f"C9.three_{k + 1}", f"three-inequality residual {k + 1}", target, _worst(three[:, k], target), tol.functional))
    ids = np.array([r["identities"] for r in rows])
    names = ("uvvu", "wuuw", "vwwv", "dxr_wv", "dxr_wu", "dxr_uv")
    for k, name in enumerate(names):
        report.add(Check(f"C9.identity_{name}", f"frame identity {name}", 0.0, _worst(ids[:, k], 0.0), tol.functional))
    report.add(Check("C9.argmin_plane", "minimising normal plane contains W", 0.0, float(col("argmin").max()), tol.argmin_plane, "le"))
    report.add(Check("C9.gap_forms", "ambient vs normal-curvature gap", None, float(col("difference").max()), 0.0, "info"))

    grng = ctx.rng("geodesic")
    g = ctx.samples.geodesics
    gpts = unit_vectors(grng, g)
    gang = grng.uniform(0.0, 2 * np.pi, g)
    geo = ctx.map(_geodesic_item, [(model, p, a, ctx.samples.geodesic_samples) for p, a in zip(gpts, gang)])
    report.add(Check("C9.lemma_W", "W'' stays in span{W, W'} along geodesics", 0.0, max(r[0] for r in geo), tol.lemma_w, "le"))
    report.add(Check("C9.lemma_W_cross", "second-derivative cross-check along geodesics", 0.0, max(r[1] for r in geo), tol.lemma_w, "le"))

    npts = unit_vectors(ctx.rng("nullity"), n)
    field = nullity_section(model, npts)
    par = float(np.linalg.norm(np.cross(field.W, field.points), axis=1).max())
    report.add(Check("C9.nullity_direction", "nullity section is the position field", 0.0, par, tol.nullity, "le"))
    report.add(Check("C9.nullity_consistency", "nullity section is transport-consistent", 0.0, float(field.consistency.min()), 0.0, "ge"))
    report.add(Check("C9.nullity_kernel", "nullity section spans the kernel", 0.0, float(field.kernel_residual.max()), tol.kernel, "le"))


# ---------------------------------------------------------------- sectional curvature


def _sectional_item(args):
    model, p, V, restarts, seed, backend = args
    res = min_sectional(model, ChartPoint.from_ambient(p, V), restarts, seed, backend=backend)
    return res.value, res.failed


def _audit_item(args):
    model, p, V, restarts, seed, samples = args
    pt = ChartPoint.from_ambient(p, V)
    return min_sectional(model, pt, restarts, seed).value, sectional_grid_min(model, pt, samples, seed)


def sectional_points(ctx: Context) -> tuple[np.ndarray, np.ndarray]:
    rng = ctx.rng("sectional")
    n = ctx.samples.sectional_points
    P = unit_vectors(rng, n)
    V = unit_vectors(rng, n) * rng.uniform(0.0, 2.0, n)[:, None]
    return P, V


def suite_sectional(ctx: Context, report: Report) -> None:
    P, Vs = sectional_points(ctx)
    r = ctx.samples.sectional_restarts
    for model in (ctx.cheeger, ctx.product):
        name = model.family
        for backend in ctx.backends:
            sfx = _suffix(ctx, backend)
            out = ctx.map(_sectional_item, [(model, p, v, r, k, backend) for k, (p, v) in enumerate(zip(P, Vs))])
            vals = np.array([o[0] for o in out])
            report.add(Check(f"C10.min_{name}{sfx}", f"nonnegative sectional curvature ({name})", 0.0, float(vals.min()), ctx.tol.sectional, "ge"))
            report.add(Check(f"C10.failed_restarts_{name}{sfx}", "restarts without a line-search decrease", None, int(sum(o[1] for o in out)), 0.0, "info"))
        pt = soul_point(P[0])
        block = min_sectional(model, pt, r, 0, subspace=(0, 1)).value
        target = 2.0 if name == "cheeger_so3" else 1.0
        report.add(Check(f"C10.soul_block_{name}", f"soul-block restricted search ({name})", target, block, ctx.tol.sectional))
    m = min(ctx.samples.audit_points, len(P))
    audit = ctx.map(_audit_item, [(ctx.cheeger, P[k], Vs[k], r, k, ctx.samples.audit_samples) for k in range(m)])
    worst = max((abs(a - b) for a, b in audit), default=0.0)
    report.add(Check("C10.audit", "plane grid agrees with the optimiser", 0.0, float(worst), ctx.tol.audit, "le"))


# ---------------------------------------------------------------- backends and determinism


def _backend_item(args):
    model, p, V = args
    pt = ChartPoint.from_ambient(p, V)
    Rj = curvature_at(model, pt, order=0, backend="jet").riemann
    Rf = curvature_at(model, pt, order=0, backend="fd").riemann
    return float(np.abs(Rf - Rj).max() / np.abs(Rj).max())


def suite_backend(ctx: Context, report: Report) -> None:
    rng = ctx.rng("backend")
    n = ctx.samples.backend_points
    P = unit_vectors(rng, n)
    V = unit_vectors(rng, n) * rng.uniform(0.0, 1.5, n)[:, None]
    rel = ctx.map(_backend_item, [(ctx.cheeger, p, v) for p, v in zip(P, V)])
    report.add(Check("C11.backends", "jet vs finite-difference curvature", 0.0, max(rel), ctx.tol.backend_relative, "le"))
    texts = [mini_run(ctx.config) for _ in range(2)]
    report.add(Check("C11.determinism", "repeated seeded runs are byte-identical", True, texts[0] == texts[1], 0, "eq"))


def mini_run(config: SuiteConfig) -> str:
    """A small seeded report, serialised; used to test determinism."""
    s = replace(config.samples, soul_points=3, sectional_points=2, audit_points=0)
    cfg = replace(config, samples=s, backend="jet")
    ctx = Context(cfg)
    rep = Report("mini", cfg.to_dict())
    suite_soul_curvature(ctx, rep)
    suite_normal_curvature(replace(ctx, config=replace(cfg, family="cheeger_so3")), rep)
    return rep.to_json()


# ---------------------------------------------------------------- commands

SUITES = {
    "C1": suite_soul_curvature,
    "C2-C4": suite_frame_metric,
    "C5": suite_normal_curvature,
    "C6": suite_holonomy,
    "C7": suite_vertical,
    "C8": suite_connection,
    "C9": suite_rigidity,
    "C10": suite_sectional,
    "C11": suite_backend,
}

COMMANDS = {
    "verify-example": tuple(SUITES),
    "rigidity-scan": ("C9",),
    "connection-sweep": ("C8",),
    "holonomy": ("C5", "C6"),
    "curvature-min": ("C10",),
}

# the worked example is the Cheeger-deformed product; its constants assume that family
FORCED_FAMILY = {"verify-example": "cheeger_so3"}


def run_command(command: str, config: SuiteConfig, workers: int = 1, suites=None) -> Report:
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    if command in FORCED_FAMILY:
        config = replace(config, family=FORCED_FAMILY[command])
    ctx = Context(config, workers)
    report = Report(command, config.to_dict())
    for name in suites or COMMANDS[command]:
        SUITES[name](ctx, report)
    return report
