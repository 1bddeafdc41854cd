"""Fréchet differentials, Gâteaux derivatives, perturbation identities and
operator Taylor remainders, all expressed through :func:`moi_spectral`."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .linalg import (
    HermitianMatrix,
    SchattenExponent,
    apply_function,
    as_hermitian,
    schatten_norm,
    spectral_decompose,
)
from .moi import MoiProblem, contract_eigenbasis, joint_hull, moi_spectral
from .scalar import CapabilityError, ScalarFunction, divided_difference_grid

__all__ = [
    "DerivativeRequest",
    "TaylorReport",
    "frechet_differential",
    "gateaux_derivative",
    "identity_scale",
    "perturbation_step",
    "perturbation_telescope",
    "rank_one_diagnostic",
    "taylor_remainder",
]


def identity_scale(f: ScalarFunction, order: int, operators, inputs) -> float:
    """Normalizer for residual checks: product of the Frobenius norms of
    ``inputs`` times ``sup |f^(order)|`` over the joint spectral hull."""
    sup = f.sup_norm(order, joint_hull(operators))
    return sup * math.prod(float(np.linalg.norm(x)) for x in inputs)


@dataclass(frozen=True, eq=False)
class DerivativeRequest:
    symbol: ScalarFunction
    base: HermitianMatrix
    directions: tuple[np.ndarray, ...]
    p: SchattenExponent = SchattenExponent(2.0)

    def __post_init__(self):
        base = as_hermitian(self.base)
        dirs = tuple(np.asarray(x, dtype=complex) for x in self.directions)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "p", SchattenExponent.coerce(self.p))
        if not dirs:
            raise ValueError("derivative order must be at least 1")
        if any(x.shape != (base.dim, base.dim) for x in dirs):
            raise ValueError("direction shape does not match the base operator")
        if self.symbol.max_order < len(dirs):
            raise CapabilityError(self.symbol.name, len(dirs))

    @property
    def order(self) -> int:
        return len(self.directions)


def frechet_differential(req: DerivativeRequest) -> np.ndarray:
    """``D^k f(A)(X_1..X_k) = sum over permutations s of T_{f^[k]}^{A..A}(X_s(1)..X_s(k))``."""
    k = req.order
    dec = spectral_decompose(req.base)
    phi = divided_difference_grid(req.symbol, [dec.cluster_values()] * (k + 1))
    bases = [dec.eigenvectors] * (k + 1)
    dim = req.base.dim
    total = np.zeros((dim, dim), complex)
    for perm in permutations(range(k)):
        total += contract_eigenbasis(phi, bases, [req.directions[i] for i in perm])
    return total


def gateaux_derivative(f: ScalarFunction, a, x, n: int) -> np.ndarray:
    """``D_G^n f(A)(X) = n! T_{f^[n]}^{A..A}(X..X)`` for self-adjoint ``X``."""
    if n < 1:
        raise ValueError("derivative order must be at least 1")
    a = as_hermitian(a)
    x = as_hermitian(x).data
    prob = MoiProblem(f, (a,) * (n + 1), (x,) * n)
    return math.factorial(n) * moi_spectral(prob)


def _moi(f, operators, perturbations) -> np.ndarray:
    return moi_spectral(MoiProblem(f, tuple(operators), tuple(perturbations)))


def perturbation_step(
    f: ScalarFunction,
    operators: Sequence,
    a,
    b,
    directions: Sequence,
    slot: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the one-slot replacement identity at order ``n``.

    ``operators`` holds the ``n - 1`` fixed operators, ``directions`` the
    ``n - 1`` perturbations and ``slot`` (1-based, ``1 <= slot <= n``) the
    position where ``A`` is replaced by ``B``::

        lhs = T_{f^[n-1]}^{..,A,..}(X) - T_{f^[n-1]}^{..,B,..}(X)
        rhs = T_{f^[n]}^{..,A,B,..}(X_1..X_{i-1}, A - B, X_i..)
    """
    ops = [as_hermitian(o) for o in operators]
    a, b = as_hermitian(a), as_hermitian(b)
    xs = list(directions)
    n = len(ops) + 1
    if len(xs) != n - 1:
        raise ValueError(f"order {n} needs {n - 1} directions")
    if not 1 <= slot <= n:
        raise ValueError(f"slot must lie in 1..{n}")
    i = slot - 1
    lhs = _moi(f, ops[:i] + [a] + ops[i:], xs) - _moi(f, ops[:i] + [b] + ops[i:], xs)
    rhs = _moi(f, ops[:i] + [a, b] + ops[i:], xs[:i] + [a.data - b.data] + xs[i:])
    return lhs, rhs


def perturbation_telescope(f: ScalarFunction, a, b, directions: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """``T^{A..A}_{f^[n-1]} - T^{B..B}_{f^[n-1]}`` against the sum over slots
    ``i`` of ``T_{f^[n]}^{B (i-1 times), A, B, A (n-i times)}`` with ``A - B``
    inserted at position ``i``; ``n = len(directions) + 1``."""
    a, b = as_hermitian(a), as_hermitian(b)
    xs = list(directions)
    n = len(xs) + 1
    lhs = _moi(f, [a] * n, xs) - _moi(f, [b] * n, xs)
    diff = a.data - b.data
    rhs = np.zeros_like(lhs)
    for i in range(1, n + 1):
        ops = [b] * (i - 1) + [a, b] + [a] * (n - i)
        rhs += _moi(f, ops, xs[: i - 1] + [diff] + xs[i - 1 :])
    return lhs, rhs


@dataclass(frozen=True, eq=False)
class TaylorReport:
    remainder: np.ndarray  # single-integral representation
    remainder_direct: np.ndarray  # f(A+X) - f(A) - sum of Gateaux terms
    remainder_norm_p: float
    bound_rhs: float
    ratio: float
    order: int
    p: float

    @property
    def discrepancy(self) -> float:
        return float(np.linalg.norm(self.remainder - self.remainder_direct))


def taylor_remainder(f: ScalarFunction, a, x, n: int, p=2.0) -> TaylorReport:
    """Order-``n`` operator Taylor remainder, computed as
    ``T_{f^[n]}^{A+X, A, .., A}(X, .., X)`` and directly from its definition."""
    if n < 1:
        raise ValueError("remainder order must be at least 1")
    p = SchattenExponent.coerce(p)
    a = as_hermitian(a)
    xh = as_hermitian(x)
    apx = HermitianMatrix.from_array(a.data + xh.data)
    rem = _moi(f, [apx] + [a] * n, [xh.data] * n)
    direct = apply_function(f, apx) - apply_function(f, a)
    for k in range(1, n):
        direct = direct - gateaux_derivative(f, a, xh, k) / math.factorial(k)
    norm = schatten_norm(rem, p)
    sup = f.sup_norm(n, joint_hull([a, apx]))
    rhs = sup * schatten_norm(xh.data, p.times(n)) ** n
    ratio = norm / rhs if rhs > 0 else (0.0 if norm == 0 else math.inf)
    return TaylorReport(rem, direct, norm, rhs, ratio, n, p.p)


def rank_one_diagnostic(f: ScalarFunction, eigenvalues: Sequence[float], m: int, t: float) -> np.ndarray:
    """Per-eigenvalue residuals ``|D_G^m f(A + t Q_k)(Q_k) - f^(m)(l_k + t) Q_k|_F``
    for ``A = diag(l)`` and ``Q_k`` the ``k``-th coordinate projection.

    For ``m = 0`` the residual compares ``f(A + t Q_k) - f(A)`` with
    ``(f(l_k + t) - f(l_k)) Q_k``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    dim = len(lam)
    a = HermitianMatrix.diag(lam)
    out = np.empty(dim)
    for k in range(dim):
        q = np.zeros((dim, dim))
        q[k, k] = 1.0
        shifted = HermitianMatrix.from_array(a.data + t * q)
        if m == 0:
            lhs = apply_function(f, shifted) - apply_function(f, a)
            target = (float(f(lam[k] + t)) - float(f(lam[k]))) * q
        else:
            lhs = gateaux_derivative(f, shifted, q, m)
            target = float(f.deriv(m, np.array([lam[k] + t]))[0]) * q
        out[k] = float(np.linalg.norm(lhs - target))
    return out
