"""Multiple operator integrals ``T_{f^[n]}^{A_1,...,A_{n+1}}(X_1, ..., X_n)``.

Three evaluators are provided for finite Hermitian data:

* :func:`moi_spectral` sums ``f^[n]`` over eigenvalue tuples against the
  spectral projections of each ``A_j`` (exact at finite dimension);
* :func:`moi_grid` evaluates the discretized sum over half-open cells
  ``[l/r, (l+1)/r)`` with the symbol sampled at left endpoints;
* :func:`moi_tensor` evaluates a symbol given as a finite sum of
  elementary tensors ``f_1 (x) ... (x) f_{n+1}`` by plain matrix products.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import NamedTuple, Sequence

import numpy as np

from .linalg import (
    HermitianMatrix,
    SchattenExponent,
    SpectralDecomposition,
    apply_function,
    as_hermitian,
    schatten_norm,
    spectral_decompose,
)
from .scalar import CapabilityError, ScalarFunction, divided_difference_grid, lookup, polynomial

__all__ = [
    "DegenerateInputError",
    "GridResult",
    "GridSpec",
    "MoiProblem",
    "TensorSymbol",
    "joint_hull",
    "moi_bound_ratio",
    "moi_grid",
    "moi_spectral",
    "moi_tensor",
]


class DegenerateInputError(ValueError):
    """A ratio or normalization has a zero denominator."""


@dataclass(frozen=True, eq=False)
class MoiProblem:
    """Order ``n``, operators ``A_1..A_{n+1}``, perturbations ``X_1..X_n``
    and the symbol ``f`` whose ``n``-th divided difference is integrated."""

    symbol: ScalarFunction
    operators: tuple[HermitianMatrix, ...]
    perturbations: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(as_hermitian(a) for a in self.operators)
        xs = tuple(np.asarray(x, dtype=complex) for x in self.perturbations)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "perturbations", xs)
        n = len(xs)
        if len(ops) != n + 1:
            raise ValueError(f"order {n} needs {n + 1} operators, got {len(ops)}")
        dim = ops[0].dim
        if any(a.dim != dim for a in ops) or any(x.shape != (dim, dim) for x in xs):
            raise ValueError("operators and perturbations must share one dimension")
        if self.symbol.max_order < n:
            raise CapabilityError(self.symbol.name, n)

    @property
    def order(self) -> int:
        return len(self.perturbations)

    @property
    def dim(self) -> int:
        return self.operators[0].dim


def _decompose_all(operators, decompositions=None) -> list[SpectralDecomposition]:
    if decompositions is not None:
        return list(decompositions)
    cache: dict[int, SpectralDecomposition] = {}
    out = []
    for a in operators:
        if id(a) not in cache:
            cache[id(a)] = spectral_decompose(a)
        out.append(cache[id(a)])
    return out


def joint_hull(operators) -> tuple[float, float]:
    """Smallest interval containing every spectrum."""
    lo, hi = math.inf, -math.inf
    for a in operators:
        w = np.linalg.eigvalsh(as_hermitian(a).data)
        lo, hi = min(lo, float(w[0])), max(hi, float(w[-1]))
    return lo, hi


def _chain_subscripts(n: int) -> tuple[str, list[str], str]:
    idx = string.ascii_lowercase[: n + 1]
    links = [idx[k] + idx[k + 1] for k in range(n)]
    return idx, links, idx[0] + idx[n]


def contract_eigenbasis(phi: np.ndarray, bases: Sequence[np.ndarray], perturbations) -> np.ndarray:
    """``sum phi[i_0..i_n] P_{i_0} X_1 P_{i_1} ... X_n P_{i_n}`` with rank-one
    projections ``P_i = u_i u_i*`` taken from the columns of ``bases``."""
    n = len(perturbations)
    ys = [bases[k].conj().T @ perturbations[k] @ bases[k + 1] for k in range(n)]
    idx, links, out = _chain_subscripts(n)
    core = np.einsum(",".join([idx] + links) + "->" + out, phi, *ys, optimize=True)
    return bases[0] @ core @ bases[n].conj().T


def moi_spectral(problem: MoiProblem, decompositions=None) -> np.ndarray:
    """Exact multiple operator integral over atomic spectral measures.

    Degenerate eigenvalues are merged per cluster (cluster mean), which makes
    summing over eigenvectors identical to summing over cluster projections.
    """
    n = problem.order
    decs = _decompose_all(problem.operators, decompositions)
    if n == 0:
        return apply_function(problem.symbol, problem.operators[0], decs[0])
    phi = divided_difference_grid(problem.symbol, [d.cluster_values() for d in decs])
    return contract_eigenbasis(phi, [d.eigenvectors for d in decs], problem.perturbations)


# -- grid engine ------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Cells of width ``1/resolution``; ``cell_range`` bounds ``|l| <= N``
    (``None`` picks a range that covers every spectrum)."""

    resolution: int
    cell_range: int | None = None

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError("resolution must be a positive integer")
        if self.cell_range is not None and self.cell_range < 1:
            raise ValueError("cell_range must be >= 1")

    def range_for(self, radius: float) -> int:
        if self.cell_range is not None:
            return int(self.cell_range)
        return int(math.ceil(self.resolution * (radius + 1.0)))

    def covers(self, radius: float) -> bool:
        return self.range_for(radius) / self.resolution > radius + 1.0 - 1e-12


class GridResult(NamedTuple):
    value: np.ndarray
    covered: bool
    cell_range: int
    terms: int
    warnings: tuple[str, ...]


def _cells(dec: SpectralDecomposition, r: int, n_max: int):
    labels = np.floor(dec.eigenvalues * r).astype(np.int64)
    kept, dropped = [], 0
    for l in sorted(set(labels.tolist())):
        cols = np.flatnonzero(labels == l)
        if abs(l) > n_max:
            dropped += len(cols)
            continue
        u = dec.eigenvectors[:, cols]
        kept.append((l, u @ u.conj().T))
    return kept, dropped


def moi_grid(problem: MoiProblem, grid: GridSpec, decompositions=None) -> GridResult:
    """Truncated discretized sum over cells ``E_{A_j}([l/r, (l+1)/r))``."""
    r = int(grid.resolution)
    decs = _decompose_all(problem.operators, decompositions)
    radius = max(float(np.max(np.abs(d.eigenvalues))) for d in decs)
    n_max = grid.range_for(radius)
    covered = grid.covers(radius)
    warnings = []
    per_op, dropped = [], 0
    for d in decs:
        cells, lost = _cells(d, r, n_max)
        per_op.append(cells)
        dropped += lost
    if not covered:
        warnings.append(f"cell range N={n_max} does not cover spectral radius {radius:.6g} at r={r}")
    if dropped:
        warnings.append(f"{dropped} eigenvalue(s) fall outside |l| <= {n_max} and are truncated")
    dim = problem.dim
    if any(not cells for cells in per_op):
        return GridResult(np.zeros((dim, dim), complex), covered, n_max, 0, tuple(warnings))
    nodes = [[l / r for l, _ in cells] for cells in per_op]
    phi = divided_difference_grid(problem.symbol, nodes)
    projs = [np.stack([e for _, e in cells]) for cells in per_op]
    n = problem.order
    cells = string.ascii_letters[: n + 1]
    mats = string.ascii_letters[n + 1 : 3 * n + 3]
    # E^1_{c_0} X_1 E^2_{c_1} ... X_n E^{n+1}_{c_n}
    subs, operands = [cells], [phi]
    for j in range(n + 1):
        subs.append(cells[j] + mats[2 * j] + mats[2 * j + 1])
        operands.append(projs[j])
        if j < n:
            subs.append(mats[2 * j + 1] + mats[2 * j + 2])
            operands.append(problem.perturbations[j])
    expr = ",".join(subs) + "->" + mats[0] + mats[2 * n + 1]
    value = np.einsum(expr, *operands, optimize=True)
    count = int(np.prod([len(c) for c in per_op]))
    return GridResult(value, covered, n_max, count, tuple(warnings))


# -- tensor engine ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TensorSymbol:
    """``phi = sum_t c_t f_{t,1} (x) ... (x) f_{t,n+1}``."""

    terms: tuple[tuple[ScalarFunction, ...], ...]
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        terms = tuple(tuple(t) for t in self.terms)
        if terms and len({len(t) for t in terms}) != 1:
            raise ValueError("all tensor terms must have the same length")
        coefs = self.coefficients
        coefs = tuple([1.0] * len(terms)) if coefs is None else tuple(float(c) for c in coefs)
        if len(coefs) != len(terms):
            raise ValueError("one coefficient per term is required")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "coefficients", coefs)

    @property
    def order(self) -> int:
        return len(self.terms[0]) - 1 if self.terms else 0

    @classmethod
    def divided_difference_of_polynomial(cls, coeffs: Sequence[float], order: int) -> "TensorSymbol":
        """Elementary-tensor form of ``p^[order]`` for ``p = sum c_m x^m``:
        ``x^m`` contributes every monomial ``x_1^a_1 ... x_{n+1}^a_{n+1}``
        with ``a_1 + ... + a_{n+1} = m - order``."""
        terms, coefs = [], []
        for m, c in enumerate(coeffs):
            if m < order or c == 0:
                continue
            for combo in combinations_with_replacement(range(order + 1), m - order):
                powers = [combo.count(j) for j in range(order + 1)]
                terms.append(tuple(_monomial(a) for a in powers))
                coefs.append(float(c))
        if not terms:
            zero = polynomial([0.0], name="zero")
            terms, coefs = [tuple([zero] * (order + 1))], [0.0]
        return cls(tuple(terms), tuple(coefs))


def _monomial(k: int) -> ScalarFunction:
    if k <= 8:
        return lookup(f"monomial_{k}")
    return polynomial([0.0] * k + [1.0], name=f"monomial_{k}")


def moi_tensor(symbol: TensorSymbol, operators, perturbations) -> np.ndarray:
    """``sum_t c_t f_{t,1}(A_1) X_1 f_{t,2}(A_2) ... X_n f_{t,n+1}(A_{n+1})``."""
    ops = [as_hermitian(a) for a in operators]
    xs = [np.asarray(x, dtype=complex) for x in perturbations]
    n = symbol.order
    if len(ops) != n + 1 or len(xs) != n:
        raise ValueError(f"tensor symbol of order {n} needs {n + 1} operators and {n} perturbations")
    decs = _decompose_all(ops)
    cache: dict[tuple[int, int], np.ndarray] = {}

    def fa(f, j):
        key = (id(f), j)
        if key not in cache:
            cache[key] = apply_function(f, ops[j], decs[j])
        return cache[key]

    dim = ops[0].dim
    total = np.zeros((dim, dim), complex)
    for coef, term in zip(symbol.coefficients, symbol.terms):
        if coef == 0:
            continue
        acc = fa(term[0], 0)
        for j in range(n):
            acc = acc @ xs[j] @ fa(term[j + 1], j + 1)
        total += coef * acc
    return total


def moi_bound_ratio(problem: MoiProblem, p=2.0, decompositions=None) -> float:
    """``|T(X_1..X_n)|_p / (sup|f^(n)| prod |X_k|_{np})`` with the sup taken
    over the hull of all spectra; a lower witness for the bound constant."""
    n = problem.order
    if n < 1:
        raise ValueError("bound ratio needs order n >= 1")
    p = SchattenExponent.coerce(p)
    np_exp = p.times(n)
    sup = problem.symbol.sup_norm(n, joint_hull(problem.operators))
    denom = sup * math.prod(schatten_norm(x, np_exp) for x in problem.perturbations)
    if not denom > 0 or not math.isfinite(denom):
        raise DegenerateInputError(f"bound denominator is {denom!r}")
    return schatten_norm(moi_spectral(problem, decompositions), p) / denom
