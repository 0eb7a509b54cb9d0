"""Truncated multivariate Taylor arithmetic (jets) and small dense linear algebra.

A :class:`Jet` stores Taylor coefficients ``c_alpha = d^alpha f / alpha!`` of
an array of scalar functions of ``NVARS`` variables, truncated at total degree
``degree``.  Coefficients live on the last axis in graded order, so truncating
to a lower degree is a prefix slice.  Leading axes broadcast like numpy.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

NVARS = 5
MAX_DEGREE = 4
ZERO_PIVOT = 1e-10


class UnsupportedOrderError(ValueError):
    pass


class StepTooSmallError(ValueError):
    pass


class JetDivisionError(ZeroDivisionError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix not positive definite: pivot {pivot} is {value:.3e}")
        self.pivot = pivot
        self.value = value


# ---------------------------------------------------------------- index tables


@lru_cache(None)
def monomials(degree: int = MAX_DEGREE) -> tuple[tuple[int, ...], ...]:
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(NVARS), d):
            e = [0] * NVARS
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return tuple(out)


@lru_cache(None)
def _index() -> dict[tuple[int, ...], int]:
    return {m: i for i, m in enumerate(monomials(MAX_DEGREE))}


def ncoef(degree: int) -> int:
    return math.comb(NVARS + degree, degree)


@lru_cache(None)
def _product_table(degree: int):
    mons = monomials(degree)
    idx = _index()
    deg = [sum(m) for m in mons]
    I, J, K = [], [], []
    for i, mi in enumerate(mons):
        for j, mj in enumerate(mons):
            if deg[i] + deg[j] <= degree:
                I.append(i)
                J.append(j)
                K.append(idx[tuple(a + b for a, b in zip(mi, mj))])
    order = np.argsort(K, kind="stable")
    I = np.asarray(I)[order]
    J = np.asarray(J)[order]
    K = np.asarray(K)[order]
    starts = np.flatnonzero(np.r_[True, K[1:] != K[:-1]])
    return I, J, starts


@lru_cache(None)
def _deriv_table(degree: int, var: int):
    idx = _index()
    targets = monomials(degree - 1)
    src = np.empty(len(targets), dtype=int)
    fac = np.empty(len(targets))
    for t, m in enumerate(targets):
        e = list(m)
        e[var] += 1
        src[t] = idx[tuple(e)]
        fac[t] = e[var]
    return src, fac


@lru_cache(None)
def _factorials(degree: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(k) for k in m) for m in monomials(degree)], float)


# ---------------------------------------------------------------- the jet type


class Jet:
    """Array of truncated Taylor expansions; arithmetic broadcasts over leading axes."""

    __array_ufunc__ = None  # make ndarray (op) Jet defer to Jet's reflected ops

    __slots__ = ("c", "degree")

    def __init__(self, coeffs, degree: int):
        c = np.asarray(coeffs, dtype=float)
        if c.shape[-1] != ncoef(degree):
            raise ValueError(f"expected {ncoef(degree)} coefficients, got {c.shape[-1]}")
        self.c = c
        self.degree = degree

    # construction
    @classmethod
    def constant(cls, value, degree: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (ncoef(degree),))
        c[..., 0] = value
        return cls(c, degree)

    @classmethod
    def variable(cls, value: float, var: int, degree: int) -> "Jet":
        c = np.zeros(ncoef(degree))
        c[0] = value
        if degree >= 1:
            c[1 + var] = 1.0
        return cls(c, degree)

    # views
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, degree={self.degree})"

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.c[key + (slice(None),)], self.degree)

    def __iter__(self):
        for i in range(self.shape[0]):
            yield self[i]

    def truncate(self, degree: int) -> "Jet":
        if degree > self.degree:
            raise ValueError("cannot raise the degree of a jet")
        return Jet(self.c[..., : ncoef(degree)], degree)

    def transpose(self, *axes) -> "Jet":
        n = len(self.shape)
        axes = axes or tuple(reversed(range(n)))
        return Jet(np.transpose(self.c, tuple(axes) + (n,)), self.degree)

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        return Jet(self.c.reshape(tuple(shape) + (self.c.shape[-1],)), self.degree)

    def sum(self, axis=None) -> "Jet":
        n = len(self.shape)
        if axis is None:
            axis = tuple(range(n))
        elif isinstance(axis, int):
            axis = (axis % n,)
        else:
            axis = tuple(a % n for a in axis)
        return Jet(self.c.sum(axis=axis), self.degree)

    def deriv(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; the result is one degree lower."""
        if self.degree == 0:
            raise UnsupportedOrderError("cannot differentiate a degree-0 jet")
        src, fac = _deriv_table(self.degree, var)
        return Jet(self.c[..., src] * fac, self.degree - 1)

    def partial(self, orders) -> np.ndarray:
        orders = tuple(orders) + (0,) * (NVARS - len(orders))
        if sum(orders) > self.degree:
            raise UnsupportedOrderError(f"order {sum(orders)} exceeds jet degree {self.degree}")
        k = _index()[orders]
        return self.c[..., k] * math.prod(math.factorial(o) for o in orders)

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            n = ncoef(d)
            return Jet(self.c[..., :n] + other.c[..., :n], d)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.array(np.broadcast_to(self.c, shape + self.c.shape[-1:]))
        c[..., 0] += other
        return Jet(c, self.degree)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.degree)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            n = ncoef(d)
            I, J, starts = _product_table(d)
            prod = self.c[..., :n][..., I] * other.c[..., :n][..., J]
            return Jet(np.add.reduceat(prod, starts, axis=-1), d)
        return Jet(self.c * other[..., None], self.degree)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.c / other[..., None], self.degree)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            return _compose_power(self, float(k))
        out = Jet.constant(np.ones(self.shape), self.degree)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __matmul__(self, other):
        return einsum("...ij,...jk->...ik", self, other)

    def __rmatmul__(self, other):
        return einsum("...ij,...jk->...ik", other, self)


# ---------------------------------------------------------------- helpers


def variables(point, degree: int) -> list[Jet]:
    """Seed jets ``x_i = point_i + delta_i`` for the given base point."""
    point = np.asarray(point, dtype=float)
    if point.size > NVARS:
        raise ValueError(f"at most {NVARS} variables")
    return [Jet.variable(x, i, degree) for i, x in enumerate(point)]


def as_jet(x, degree: int) -> Jet:
    return x if isinstance(x, Jet) else Jet.constant(x, degree)


def stack(items, axis: int = 0) -> Jet:
    degrees = [j.degree for j in items if isinstance(j, Jet)]
    if not degrees:
        raise TypeError("stack needs at least one Jet")
    d = min(degrees)
    n = ncoef(d)
    arrs = [as_jet(j, d).c[..., :n] for j in items]
    ndim = arrs[0].ndim - 1
    if axis < 0:
        axis += ndim + 1
    return Jet(np.stack(arrs, axis=axis), d)


def einsum(spec: str, a, b) -> Jet:
    """Two-operand einsum where either operand may be a jet."""
    ins, out = spec.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        d = min(a.degree, b.degree)
        n = ncoef(d)
        I, J, starts = _product_table(d)
        prod = np.einsum(f"{sa}Z,{sb}Z->{out}Z", a.c[..., :n][..., I], b.c[..., :n][..., J])
        return Jet(np.add.reduceat(prod, starts, axis=-1), d)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{sa}Z,{sb}->{out}Z", a.c, np.asarray(b, float)), a.degree)
    if isinstance(b, Jet):
        return Jet(np.einsum(f"{sa},{sb}Z->{out}Z", np.asarray(a, float), b.c), b.degree)
    return np.einsum(spec, a, b)


def _compose(a: Jet, taylor) -> Jet:
    """f(a) from ``taylor[k] = f^(k)(a0)/k!`` (arrays shaped like ``a``)."""
    nil = Jet(a.c.copy(), a.degree)
    nil.c[..., 0] = 0.0
    out = Jet.constant(taylor[a.degree], a.degree)
    for k in range(a.degree - 1, -1, -1):
        out = out * nil + taylor[k]
    return out


def reciprocal(a: Jet) -> Jet:
    a0 = a.value
    if np.any(np.abs(a0) < ZERO_PIVOT):
        raise JetDivisionError("degree-0 part of divisor is numerically zero")
    return _compose(a, [(-1.0) ** k / a0 ** (k + 1) for k in range(a.degree + 1)])


def _compose_power(a: Jet, r: float) -> Jet:
    a0 = a.value
    if np.any(a0 <= 0):
        raise ValueError("fractional power of a jet needs a positive degree-0 part")
    return _compose(a, [_binom(r, k) * a0 ** (r - k) for k in range(a.degree + 1)])


def _binom(r: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (r - i) / (i + 1)
    return out


def sqrt(x):
    if isinstance(x, Jet):
        return _compose_power(x, 0.5)
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.value)
        return _compose(x, [e / math.factorial(k) for k in range(x.degree + 1)])
    return np.exp(x)


def sin(x):
    if isinstance(x, Jet):
        v = x.value
        return _compose(x, [np.sin(v + k * np.pi / 2) / math.factorial(k) for k in range(x.degree + 1)])
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        v = x.value
        return _compose(x, [np.cos(v + k * np.pi / 2) / math.factorial(k) for k in range(x.degree + 1)])
    return np.cos(x)


def inv(a: Jet) -> Jet:
    """Inverse of a jet-valued square matrix via the nilpotent Neumann series."""
    a0 = a.value
    b = np.linalg.inv(a0)
    nil = Jet(a.c.copy(), a.degree)
    nil.c[..., 0] = 0.0
    m = -einsum("...ij,...jk->...ik", b, nil)
    term = Jet.constant(b, a.degree)
    out = term
    for _ in range(a.degree):
        term = m @ term
        out = out + term
    return out


# ---------------------------------------------------------------- derivatives


def partials(field, point, orders) -> float:
    """Exact mixed partial of ``field`` at ``point`` by jet propagation."""
    orders = tuple(int(o) for o in orders)
    order = sum(orders)
    if order > MAX_DEGREE:
        raise UnsupportedOrderError(f"order {order} > {MAX_DEGREE}")
    if any(o < 0 for o in orders):
        raise UnsupportedOrderError("negative order")
    xs = variables(point, order)
    f = as_jet(field(*xs), order)
    return float(f.partial(orders))


_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def _central(field, point, orders, h):
    terms = [((), 1.0)]
    for var, k in enumerate(orders):
        terms = [(off + (o,), w * c / h**k) for off, w in terms for o, c in _STENCILS[k].items()]
    total = 0.0
    for offsets, w in terms:
        x = point.copy()
        x[: len(offsets)] += h * np.asarray(offsets, float)
        total = total + w * np.asarray(field(*x), dtype=float)
    return total if np.ndim(total) else float(total)


def fd_partials(field, point, orders, step: float = 1e-3) -> float:
    """Central finite difference with one Richardson level; independent of the jets."""
    orders = tuple(int(o) for o in orders)
    if sum(orders) > MAX_DEGREE:
        raise UnsupportedOrderError(f"order {sum(orders)} > {MAX_DEGREE}")
    point = np.asarray(point, dtype=float)
    if not step > 0:
        raise StepTooSmallError("step must be positive")
    if step < 1e-8 or np.any(point + 0.5 * step == point):
        raise StepTooSmallError(f"step {step:g} underflows at this point")
    orders = orders + (0,) * (point.size - len(orders))
    coarse = _central(field, point, orders, step)
    fine = _central(field, point, orders, step / 2)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------- small matrices


def cholesky(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise NotPositiveDefiniteError(-1, float(np.abs(a - a.T).max()))
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= ZERO_PIVOT * max(1.0, abs(a[j, j])):
            raise NotPositiveDefiniteError(j, float(d))
        L[j, j] = math.sqrt(d)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(a, rhs) -> np.ndarray:
    L = cholesky(a)
    rhs = np.asarray(rhs, dtype=float)
    n = L.shape[0]
    y = np.zeros_like(rhs)
    for i in range(n):
        y[i] = (rhs[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1 :, i] @ x[i + 1 :]) / L[i, i]
    return x
