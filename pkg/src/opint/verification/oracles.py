"""Reference computations that share no code with the closed-form engines.

``fd_derivative`` and ``fd_mixed_derivative`` differentiate ``t -> f(A + tX)``
numerically; ``dd_bruteforce`` evaluates the literal nested quotient in
extended precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from ..linalg import apply_function, as_hermitian
from ..scalar import ScalarFunction

__all__ = ["FdOracleSpec", "FdResult", "dd_bruteforce", "fd_derivative", "fd_mixed_derivative"]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FdOracleSpec:
    """Descending step sizes and the Richardson extrapolation depth."""

    steps: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
    depth: int = 3

    def __post_init__(self):
        steps = tuple(float(h) for h in self.steps)
        if not steps or any(h <= 0 for h in steps):
            raise ValueError("steps must be positive")
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ValueError("steps must be strictly descending")
        if self.depth < 0:
            raise ValueError("Richardson depth must be >= 0")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def for_order(cls, n: int) -> "FdOracleSpec":
        # h^-n amplifies round-off, so higher orders start from a larger step
        if n <= 1:
            return cls()
        return cls(steps=(0.1, 0.05, 0.025, 0.0125), depth=3)


@dataclass(frozen=True)
class FdResult:
    value: np.ndarray
    error: float
    reliable: bool
    sweep: tuple[float, ...]  # |D(h_{i+1}) - D(h_i)|_F along the step set
    roundoff: float


def _neville_weights(steps: Sequence[float], depth: int) -> list[list[np.ndarray]]:
    """Weights w with extrapolated value sum w_i D(h_i), for an error
    expansion in powers of h^2."""
    m = len(steps)
    u = np.asarray(steps) ** 2
    rows = [[np.eye(m)[i]] for i in range(m)]
    for i in range(m):
        for j in range(1, min(i, depth) + 1):
            prev, diag = rows[i][j - 1], rows[i - 1][j - 1]
            rows[i].append(prev + (prev - diag) * u[i] / (u[i - j] - u[i]))
    return rows


def _extrapolate(samples: list[np.ndarray], steps, depth: int, roundoffs: list[float]) -> FdResult:
    m = len(samples)
    d = min(depth, m - 1)
    rows = _neville_weights(steps, d)
    combine = lambda w: sum(wi * s for wi, s in zip(w, samples))  # noqa: E731
    best_w = rows[m - 1][d]
    best = combine(best_w)
    rough = float(sum(abs(w) * r for w, r in zip(best_w, roundoffs)))
    if d >= 1:
        trunc = max(
            float(np.linalg.norm(best - combine(rows[m - 1][d - 1]))),
            float(np.linalg.norm(best - combine(rows[m - 2][d - 1]))),
        )
    else:
        trunc = float(np.linalg.norm(samples[-1] - samples[-2])) if m > 1 else math.inf
    sweep = tuple(float(np.linalg.norm(b - a)) for a, b in zip(samples, samples[1:]))
    floor = 4 * max(roundoffs)
    reliable = all(b < a or b <= floor for a, b in zip(sweep, sweep[1:]))
    return FdResult(best, trunc + rough, reliable, sweep, rough)


def _direction_scale(directions) -> float:
    s = max(float(np.linalg.norm(x, 2)) for x in directions)
    return s if s > 0 else 1.0


def fd_derivative(f: ScalarFunction, a, x, n: int, spec: FdOracleSpec | None = None) -> FdResult:
    """n-th derivative at ``t = 0`` of ``t -> f(A + tX)`` by central differences
    with Richardson extrapolation in ``h^2``."""
    if n < 1:
        raise ValueError("derivative order must be at least 1")
    spec = spec or FdOracleSpec.for_order(n)
    a = as_hermitian(a).data
    x = as_hermitian(x).data
    s = _direction_scale([x])
    xu = x / s
    weights = [(-1) ** j * math.comb(n, j) for j in range(n + 1)]
    samples, roundoffs = [], []
    for h in spec.steps:
        acc = 0
        gmax = 0.0
        for j, w in enumerate(weights):
            g = apply_function(f, a + (n / 2 - j) * h * xu)
            gmax = max(gmax, float(np.linalg.norm(g)))
            acc = acc + w * g
        samples.append(acc / h**n * s**n)
        roundoffs.append(16 * _EPS * gmax * sum(abs(w) for w in weights) / h**n * s**n)
    return _extrapolate(samples, spec.steps, spec.depth, roundoffs)


def fd_mixed_derivative(f: ScalarFunction, a, directions: Sequence, spec: FdOracleSpec | None = None) -> FdResult:
    """Mixed partial ``d^k/dt_1..dt_k f(A + sum t_i X_i)`` at zero, using the
    ``2^k``-point central stencil ``h^-k sum_e (prod e) f(A + h/2 sum e_i X_i)``."""
    k = len(directions)
    if k < 1:
        raise ValueError("need at least one direction")
    spec = spec or FdOracleSpec.for_order(k)
    a = as_hermitian(a).data
    xs = [as_hermitian(x).data for x in directions]
    s = _direction_scale(xs)
    xs = [x / s for x in xs]
    samples, roundoffs = [], []
    for h in spec.steps:
        acc = 0
        gmax = 0.0
        for signs in itertools.product((1, -1), repeat=k):
            shift = sum(e * x for e, x in zip(signs, xs))
            g = apply_function(f, a + 0.5 * h * shift)
            gmax = max(gmax, float(np.linalg.norm(g)))
            acc = acc + math.prod(signs) * g
        samples.append(acc / h**k * s**k)
        roundoffs.append(16 * _EPS * gmax * 2**k / h**k * s**k)
    return _extrapolate(samples, spec.steps, spec.depth, roundoffs)


# -- divided differences --------------------------------------------------------


def _nested_quotient(mpf, xs: tuple) -> mpmath.mpf:
    @lru_cache(maxsize=None)
    def dd(args: tuple):
        if len(args) == 1:
            return mpf(args[0])
        head, a, b = args[:-2], args[-2], args[-1]
        return (dd(head + (b,)) - dd(head + (a,))) / (b - a)

    return dd(xs)


def dd_bruteforce(
    f: ScalarFunction,
    nodes: Sequence[float],
    eta: float = 1e-10,
    levels: int = 4,
    dps: int = 80,
) -> float:
    """Divided difference from the literal recursive quotient in ``dps``-digit
    arithmetic. Repeated nodes are split symmetrically by multiples of
    ``eta`` and the result is extrapolated to ``eta -> 0``."""
    if f.mp is None:
        raise ValueError(f"symbol {f.name!r} has no extended-precision evaluator")
    xs = [float(v) for v in nodes]
    with mpmath.workdps(dps):
        groups: dict[float, int] = {}
        for v in xs:
            groups[v] = groups.get(v, 0) + 1
        if max(groups.values()) == 1:
            return float(_nested_quotient(f.mp, tuple(mpmath.mpf(v) for v in xs)))

        def perturbed(e):
            seen: dict[float, int] = {}
            out = []
            for v in xs:
                m = groups[v]
                j = seen.get(v, 0)
                seen[v] = j + 1
                out.append(mpmath.mpf(v) + e * (j - mpmath.mpf(m - 1) / 2))
            return tuple(out)

        etas = [mpmath.mpf(eta) / 2**i for i in range(levels)]
        vals = [_nested_quotient(f.mp, perturbed(e)) for e in etas]
        # Neville extrapolation to eta = 0 (polynomial in eta)
        tab = list(vals)
        for j in range(1, levels):
            for i in range(levels - 1, j - 1, -1):
                tab[i] = tab[i] + (tab[i] - tab[i - 1]) * etas[i] / (etas[i - j] - etas[i])
        return float(tab[-1])
