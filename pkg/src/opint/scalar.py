"""Scalar symbols with exact derivatives, and their divided differences.

Every symbol in :func:`builtin_catalog` carries vectorized derivative
formulas of every order up to ``max_order``, truthful smoothness flags,
and an mpmath evaluator used by the high-precision oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "CapabilityError",
    "ClassFlags",
    "ScalarFunction",
    "builtin_catalog",
    "lookup",
    "polynomial",
    "divided_difference",
    "divided_difference_grid",
    "divided_difference_table",
    "default_confluent_tol",
]

Derivative = Callable[[int, np.ndarray], np.ndarray]

# Near-coincident node blocks narrower than this use a Taylor expansion
# instead of the difference quotient.
TAYLOR_SPREAD = 0.1
TAYLOR_TERMS = 18
_SUP_GRID = 1025


class CapabilityError(ValueError):
    """A symbol lacks a derivative order that a computation needs."""

    def __init__(self, symbol: str, order: int):
        super().__init__(f"symbol {symbol!r} has no derivative of order {order}")
        self.symbol = symbol
        self.order = order


@dataclass(frozen=True)
class ClassFlags:
    # f', ..., f^(k) are bounded on R for every k <= bounded_order
    bounded_order: float
    nth_derivative_vanishes_at_infinity: bool
    compactly_supported: bool = False

    def derivatives_bounded_up_to(self, k: int) -> bool:
        return k <= self.bounded_order


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """Real symbol ``f`` with derivatives ``f^(k)`` for ``k <= max_order``."""

    name: str
    deriv: Derivative
    max_order: int
    flags: ClassFlags
    mp: Callable | None = None
    # interval outside which |f^(k)| is negligible; None: some f^(k) unbounded
    sup_window: tuple[float, float] | None = None
    exact_sups: dict = field(default_factory=dict)
    # open interval of real analyticity; Taylor evaluation of near-confluent
    # blocks is only used inside it
    analytic_on: tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, x):
        return self.deriv(0, np.asarray(x, dtype=float))

    def derivative(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        if k < 0:
            raise ValueError("derivative order must be non-negative")
        if k > self.max_order:
            raise CapabilityError(self.name, k)
        return lambda x: self.deriv(k, np.asarray(x, dtype=float))

    def affine(self, a: float = 1.0, b: float = 0.0) -> "ScalarFunction":
        """The symbol ``x -> f(a x + b)``."""
        a, b = float(a), float(b)
        if a == 1.0 and b == 0.0:
            return self
        if a == 0.0:
            raise ValueError("affine scale a must be nonzero")
        base = self

        def deriv(k, x):
            return a**k * base.deriv(k, a * np.asarray(x, dtype=float) + b)

        mp_eval = None
        if base.mp is not None:
            mp_eval = lambda x: base.mp(a * x + b)  # noqa: E731
        window = None
        if base.sup_window is not None:
            lo, hi = sorted(((base.sup_window[0] - b) / a, (base.sup_window[1] - b) / a))
            window = (lo, hi)
        return ScalarFunction(
            name=f"{base.name}(a={a:g},b={b:g})",
            deriv=deriv,
            max_order=base.max_order,
            flags=base.flags,
            mp=mp_eval,
            sup_window=window,
            exact_sups={k: abs(a) ** k * v for k, v in base.exact_sups.items()},
            analytic_on=tuple(sorted(((base.analytic_on[0] - b) / a, (base.analytic_on[1] - b) / a))),
        )

    def sup_norm(self, k: int, interval: tuple[float, float] | None = None) -> float:
        """``sup |f^(k)|`` over ``interval``, or over the real line."""
        d = self.derivative(k)
        if interval is None:
            if k in self.exact_sups:
                return float(self.exact_sups[k])
            if self.sup_window is None or (k > 0 and not self.flags.derivatives_bounded_up_to(k)):
                return math.inf
            interval = self.sup_window
        lo, hi = float(interval[0]), float(interval[1])
        if hi < lo:
            lo, hi = hi, lo
        if hi == lo:
            return float(abs(d(np.array([lo]))[0]))
        xs = np.linspace(lo, hi, _SUP_GRID)
        vals = np.abs(d(xs))
        i = int(np.argmax(vals))
        best = float(vals[i])
        if 0 < i < len(xs) - 1:
            best = max(best, _refine_max(lambda t: abs(float(d(np.array([t]))[0])), xs[i - 1], xs[i + 1]))
        return best

    def self_test(self, max_k: int | None = None, probe=None) -> float:
        """Largest relative mismatch between ``f^(k)`` and a Richardson
        central difference of ``f^(k-1)`` over a probe grid."""
        if probe is None:
            lo, hi = self.sup_window or (-2.0, 2.0)
            probe = np.linspace(lo, hi, 37)[1:-1]
        probe = np.asarray(probe, dtype=float)
        top = self.max_order if max_k is None else min(max_k, self.max_order)
        worst = 0.0
        for k in range(1, top + 1):
            g = self.derivative(k - 1)
            exact = self.deriv(k, probe)
            # coarse step limits round-off, fine step limits truncation near
            # rapid variation; keep the better of the two per point
            err = np.minimum(
                np.abs(exact - _richardson_central(g, probe, h=1e-2)),
                np.abs(exact - _richardson_central(g, probe, h=1e-3)),
            )
            scale = max(float(np.max(np.abs(exact))), 1e-300)
            worst = max(worst, float(np.max(err)) / scale)
        return worst

    def __repr__(self) -> str:
        return f"ScalarFunction({self.name!r}, max_order={self.max_order})"


def _refine_max(g, a: float, b: float, iters: int = 60) -> float:
    # golden-section search for a local maximum of g on [a, b]
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return max(gc, gd)


def _richardson_central(g, x, h: float, levels: int = 4):
    tab = []
    for i in range(levels):
        hi = h / 2**i
        row = [(g(x + hi) - g(x - hi)) / (2 * hi)]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - tab[i - 1][j - 1]) / (4**j - 1))
        tab.append(row)
    return tab[-1][-1]


# -- catalog --------------------------------------------------------------------


def polynomial(coeffs: Sequence[float], name: str | None = None) -> ScalarFunction:
    """Polynomial ``sum c_j x^j`` (coefficients in ascending order)."""
    p = Polynomial(np.asarray(coeffs, dtype=float))
    p = p.trim() if np.any(p.coef) else Polynomial([0.0])
    degree = p.degree()
    derivs = [p]
    for _ in range(degree):
        derivs.append(derivs[-1].deriv())
    coef = [float(c) for c in p.coef]

    def deriv(k, x):
        x = np.asarray(x, dtype=float)
        if k > degree:
            return np.zeros_like(x)
        return derivs[k](x)

    def mp_eval(x):
        acc = mpmath.mpf(0)
        for c in reversed(coef):
            acc = acc * x + c
        return acc

    exact = {k: 0.0 for k in range(degree + 1, degree + 65)}
    if degree >= 0:
        exact[degree] = abs(float(derivs[degree].coef[0]))
    return ScalarFunction(
        name=name or f"poly{tuple(coef)}",
        deriv=deriv,
        max_order=degree + 64,
        flags=ClassFlags(
            bounded_order=math.inf if degree <= 1 else 0,
            nth_derivative_vanishes_at_infinity=False,
        ),
        mp=mp_eval,
        sup_window=None,
        exact_sups=exact,
    )


def _monomial(k: int) -> ScalarFunction:
    coeffs = [0.0] * k + [1.0]
    return polynomial(coeffs, name=f"monomial_{k}")


def _exp() -> ScalarFunction:
    return ScalarFunction(
        name="exp",
        deriv=lambda k, x: np.exp(x),
        max_order=64,
        flags=ClassFlags(bounded_order=0, nth_derivative_vanishes_at_infinity=False),
        mp=mpmath.exp,
    )


def _trig(name: str) -> ScalarFunction:
    cycle = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)]
    shift = 0 if name == "sin" else 1
    return ScalarFunction(
        name=name,
        deriv=lambda k, x: cycle[(k + shift) % 4](x),
        max_order=64,
        flags=ClassFlags(bounded_order=math.inf, nth_derivative_vanishes_at_infinity=False),
        mp=getattr(mpmath, name),
        sup_window=(-math.pi, math.pi),
        exact_sups={k: 1.0 for k in range(65)},
    )


def _gaussian() -> ScalarFunction:
    def deriv(k, x):
        x = np.asarray(x, dtype=float)
        # d^k/dx^k e^{-x^2} = (-1)^k H_k(x) e^{-x^2}, physicists' Hermite H_k
        h_prev, h = np.zeros_like(x), np.ones_like(x)
        for j in range(k):
            h_prev, h = h, 2 * x * h - 2 * j * h_prev
        return (-1) ** k * h * np.exp(-x * x)

    return ScalarFunction(
        name="gaussian",
        deriv=deriv,
        max_order=40,
        flags=ClassFlags(bounded_order=math.inf, nth_derivative_vanishes_at_infinity=True),
        mp=lambda x: mpmath.exp(-x * x),
        sup_window=(-12.0, 12.0),
    )


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logistic(max_order: int = 16) -> ScalarFunction:
    # sigma^(k) = P_k(t), t = tanh(x/2), with d/dx = (1 - t^2)/2 d/dt
    polys = [Polynomial([0.5, 0.5])]
    half_sech2 = Polynomial([0.5, 0.0, -0.5])
    for _ in range(max_order):
        polys.append(half_sech2 * polys[-1].deriv())

    def deriv(k, x):
        return polys[k](np.tanh(0.5 * np.asarray(x, dtype=float)))

    return ScalarFunction(
        name="logistic",
        deriv=deriv,
        max_order=max_order,
        flags=ClassFlags(bounded_order=math.inf, nth_derivative_vanishes_at_infinity=True),
        mp=lambda x: 1 / (1 + mpmath.exp(-x)),
        sup_window=(-40.0, 40.0),
        exact_sups={0: 1.0, 1: 0.25},
    )


def _rational() -> ScalarFunction:
    def deriv(k, x):
        z = np.asarray(x, dtype=float) - 1j
        return np.real((-1) ** k * math.factorial(k) / z ** (k + 1))

    return ScalarFunction(
        name="rational",
        deriv=deriv,
        max_order=60,
        flags=ClassFlags(bounded_order=math.inf, nth_derivative_vanishes_at_infinity=True),
        mp=lambda x: x / (1 + x * x),
        sup_window=(-60.0, 60.0),
        exact_sups={0: 0.5},
    )


def _bump(max_order: int = 24) -> ScalarFunction:
    # f = exp(g) with g = 1/(x^2 - 1) on (-1, 1), so f^(k) = Q_k f where
    # Q_0 = 1 and Q_{k+1} = sum_j C(k, j) g^(j+1) Q_{k-j}
    def deriv(k, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        xi = x[inside]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            g = 1.0 / (xi * xi - 1.0)
            gd = [g] + [
                0.5 * (-1) ** j * math.factorial(j) * ((xi - 1.0) ** (-j - 1) - (xi + 1.0) ** (-j - 1))
                for j in range(1, k + 1)
            ]
            q = [np.ones_like(xi)]
            for m in range(k):
                q.append(sum(math.comb(m, j) * gd[j + 1] * q[m - j] for j in range(m + 1)))
            # below exp(-700) the product is negligible and Q_k may overflow
            out[inside] = np.where(g > -700.0, q[k] * np.exp(np.maximum(g, -700.0)), 0.0)
        return out

    def mp_eval(x):
        if abs(x) >= 1:
            return mpmath.mpf(0)
        return mpmath.exp(-1 / (1 - x * x))

    return ScalarFunction(
        name="bump",
        deriv=deriv,
        max_order=max_order,
        flags=ClassFlags(
            bounded_order=math.inf, nth_derivative_vanishes_at_infinity=True, compactly_supported=True
        ),
        mp=mp_eval,
        sup_window=(-1.0, 1.0),
        analytic_on=(-1.0, 1.0),
    )


def _build_catalog() -> dict[str, ScalarFunction]:
    fns = [_monomial(k) for k in range(9)]
    fns += [_exp(), _trig("sin"), _trig("cos"), _gaussian(), _logistic(), _rational(), _bump()]
    return {f.name: f for f in fns}


_CATALOG = _build_catalog()


def builtin_catalog() -> list[ScalarFunction]:
    return list(_CATALOG.values())


def lookup(name: str, a: float = 1.0, b: float = 0.0) -> ScalarFunction:
    """Catalog symbol by name, optionally precomposed with ``x -> a x + b``."""
    try:
        f = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown symbol {name!r}; known: {sorted(_CATALOG)}") from None
    return f.affine(a, b)


# -- divided differences ----------------------------------------------------------


def default_confluent_tol(nodes) -> float:
    return 1e-7 * max(1.0, max(abs(float(x)) for x in nodes))


def _snap(nodes, tol: float) -> list[float]:
    xs = sorted(float(x) for x in nodes)
    out: list[float] = []
    start = 0
    for i in range(1, len(xs) + 1):
        if i == len(xs) or xs[i] - xs[i - 1] >= tol:
            block = xs[start:i]
            c = block[0] if len(block) == 1 else math.fsum(block) / len(block)
            out.extend([c] * len(block))
            start = i
    return out


def _snap_rows(xs: np.ndarray, tol: float | None) -> np.ndarray:
    """Row-wise :func:`_snap` for rows that are already sorted."""
    if xs.shape[1] < 2:
        return xs
    if tol is None:
        tols = 1e-7 * np.maximum(1.0, np.max(np.abs(xs), axis=1))
    else:
        tols = np.full(xs.shape[0], float(tol))
    gaps = np.diff(xs, axis=1)
    todo = np.flatnonzero(np.any((gaps > 0) & (gaps < tols[:, None]), axis=1))
    if len(todo):
        xs = xs.copy()
        for i in todo:
            xs[i] = _snap(xs[i], tols[i])
    return xs


def _taylor_rows(f: ScalarFunction, ys: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """f[y_0..y_k] per row from the Taylor expansion of f about the row mean,
    with a mask of rows where the expansion has converged."""
    terms = min(TAYLOR_TERMS, f.max_order - k)
    if terms < 4:
        return np.zeros(len(ys)), np.zeros(len(ys), dtype=bool)
    c = ys.mean(axis=1)
    zs = ys - c[:, None]
    # complete homogeneous symmetric polynomials h_j(z_0..z_k), j <= terms
    h = np.zeros((len(ys), terms + 1))
    h[:, 0] = 1.0
    for col in range(ys.shape[1]):
        for j in range(1, terms + 1):
            h[:, j] += zs[:, col] * h[:, j - 1]
    coef = np.stack([f.deriv(m, c) / math.factorial(m) for m in range(k, k + terms + 1)], axis=1)
    with np.errstate(invalid="ignore", over="ignore"):
        t = coef * h
        mag = np.max(np.abs(t), axis=1)
        tail = np.abs(t[:, -1]) + np.abs(t[:, -2])
    ok = np.all(np.isfinite(t), axis=1) & ((mag == 0) | (tail <= 1e-17 * mag))
    return np.where(mag == 0, 0.0, np.sum(t, axis=1)), ok


def _divided_difference_rows(f: ScalarFunction, xs: np.ndarray) -> np.ndarray:
    """Confluent Newton tableau for each row of sorted, snapped nodes."""
    m, width = xs.shape
    n = width - 1
    need = max((k for k in range(1, n + 1) if np.any(xs[:, k:] == xs[:, :-k])), default=0)
    if need > f.max_order:
        raise CapabilityError(f.name, need)
    row = f.deriv(0, xs.ravel()).reshape(xs.shape).astype(float)
    lo_ok, hi_ok = f.analytic_on
    for k in range(1, n + 1):
        lo, hi = xs[:, : n - k + 1], xs[:, k:]
        same = hi == lo
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = (row[:, 1:] - row[:, :-1]) / (hi - lo)
        if same.any():
            nxt[same] = f.deriv(k, lo[same]) / math.factorial(k)
        near = ~same & (hi - lo <= TAYLOR_SPREAD) & (lo > lo_ok) & (hi < hi_ok)
        if near.any():
            ii, jj = np.nonzero(near)
            blocks = xs[ii[:, None], jj[:, None] + np.arange(k + 1)]
            vals, ok = _taylor_rows(f, blocks, k)
            nxt[ii[ok], jj[ok]] = vals[ok]
        row = nxt
    return row[:, 0]


def divided_difference(f: ScalarFunction, nodes: Sequence[float], tol: float | None = None) -> float:
    """Divided difference ``f^[n](x_1, ..., x_{n+1})`` with ``n = len(nodes) - 1``.

    Nodes closer than ``tol`` are merged to their mean and repeated nodes are
    handled confluently through derivatives, so the result is exactly
    symmetric in its arguments.
    """
    xs = np.sort(np.asarray(nodes, dtype=float).ravel())
    if xs.size == 0:
        raise ValueError("need at least one node")
    return float(_divided_difference_rows(f, _snap_rows(xs[None, :], tol))[0])


def divided_difference_grid(
    f: ScalarFunction, node_lists: Sequence[Sequence[float]], tol: float | None = None
) -> np.ndarray:
    """Tensor ``phi[i_1, ..., i_m] = f^[m-1](node_lists[0][i_1], ...)``."""
    node_lists = [np.asarray(v, dtype=float).ravel() for v in node_lists]
    shape = tuple(len(v) for v in node_lists)
    if 0 in shape:
        return np.empty(shape)
    # replace every node by its rank among all distinct values, sort each index
    # tuple and evaluate once per distinct multiset
    values, ranks = np.unique(np.concatenate(node_lists), return_inverse=True)
    offsets = np.cumsum((0,) + shape[:-1])
    axes = np.meshgrid(*(ranks[o : o + s] for o, s in zip(offsets, shape)), indexing="ij")
    keys = np.sort(np.stack([a.ravel() for a in axes], axis=1), axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    vals = _divided_difference_rows(f, _snap_rows(values[uniq], tol))
    return vals[inverse.ravel()].reshape(shape)


def divided_difference_table(f: ScalarFunction, grid: Sequence[float], order: int) -> np.ndarray:
    """All ``f^[order]`` values over ``(order+1)``-tuples drawn from ``grid``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return divided_difference_grid(f, [grid] * (order + 1))
