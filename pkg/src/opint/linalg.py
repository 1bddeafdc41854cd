"""Dense Hermitian linear algebra: construction, spectral decomposition,
functions of one operator and Schatten norms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "HermitianError",
    "HermitianMatrix",
    "SchattenExponent",
    "SpectralDecomposition",
    "SpectralError",
    "apply_function",
    "as_hermitian",
    "default_cluster_tol",
    "read_matrix",
    "schatten_norm",
    "spectral_decompose",
    "write_matrix",
    "matrix_to_json",
    "matrix_from_json",
]

HERMITIAN_REJECT_TOL = 1e-8


class HermitianError(ValueError):
    """Input is too far from self-adjoint to be symmetrized silently."""


class SpectralError(ArithmeticError):
    """The eigensolver failed on the given matrix."""


class DomainError(ValueError):
    """A scalar function is undefined on part of a spectrum."""

    def __init__(self, message: str, eigenvalues: Sequence[float] = ()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Complex self-adjoint matrix.

    Construct through :meth:`from_array`, which replaces ``M`` by
    ``(M + M*)/2`` and records the size of that correction.
    """

    data: np.ndarray
    correction: float = 0.0

    @classmethod
    def from_array(cls, m, tol: float = HERMITIAN_REJECT_TOL) -> "HermitianMatrix":
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise HermitianError(f"expected a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise HermitianError("matrix has non-finite entries")
        sym = 0.5 * (m + m.conj().T)
        corr = float(np.linalg.norm(m - sym))
        norm = float(np.linalg.norm(m))
        if corr > tol * max(norm, np.finfo(float).tiny):
            raise HermitianError(
                f"matrix is not Hermitian: correction {corr:.3e} exceeds {tol:g} * |M|_F = {tol * norm:.3e}"
            )
        return cls(_readonly(sym), corr)

    @classmethod
    def diag(cls, values) -> "HermitianMatrix":
        return cls.from_array(np.diag(np.asarray(values, dtype=float)))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.data, dtype=dtype)

    def __add__(self, other) -> "HermitianMatrix":
        return HermitianMatrix.from_array(self.data + np.asarray(other))

    def __sub__(self, other) -> "HermitianMatrix":
        return HermitianMatrix.from_array(self.data - np.asarray(other))

    def __repr__(self) -> str:
        return f"HermitianMatrix(dim={self.dim})"


def as_hermitian(a) -> HermitianMatrix:
    if isinstance(a, HermitianMatrix):
        return a
    return HermitianMatrix.from_array(a)


@dataclass(frozen=True)
class SchattenExponent:
    """Schatten norm index ``p >= 1``; ``math.inf`` gives the operator norm."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p < 1:
            raise ValueError(f"Schatten exponent must satisfy p >= 1, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def coerce(cls, p) -> "SchattenExponent":
        if isinstance(p, SchattenExponent):
            return p
        if isinstance(p, str) and p.lower() in {"inf", "infinity"}:
            return cls(math.inf)
        return cls(p)

    def times(self, n: int) -> "SchattenExponent":
        """The exponent ``n * p`` used on perturbations in multilinear bounds."""
        return SchattenExponent(self.p * n)

    def __float__(self) -> float:
        return self.p


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    tol: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def cluster_values(self) -> np.ndarray:
        """Eigenvalues with every cluster replaced by its mean."""
        out = np.array(self.eigenvalues, dtype=float)
        for c in self.clusters:
            out[list(c)] = np.mean(self.eigenvalues[list(c)])
        return out

    def projection(self, cluster: int) -> np.ndarray:
        u = self.eigenvectors[:, list(self.clusters[cluster])]
        return u @ u.conj().T

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def default_cluster_tol(eigenvalues) -> float:
    radius = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return 1e-8 * max(1.0, radius)


def _clusters(values: np.ndarray, tol: float) -> tuple[tuple[int, ...], ...]:
    groups: list[list[int]] = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def spectral_decompose(a, tol: float | None = None) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues ascending and clusters of
    near-equal eigenvalues (consecutive gaps below ``tol``)."""
    a = as_hermitian(a)
    try:
        w, v = np.linalg.eigh(a.data)
    except np.linalg.LinAlgError as exc:
        fro = float(np.linalg.norm(a.data))
        raise SpectralError(
            f"eigensolver did not converge (dim={a.dim}, |A|_F={fro:.3e}): {exc}"
        ) from exc
    order = np.lexsort((np.arange(len(w)), w))
    w, v = w[order], v[:, order]
    if tol is None:
        tol = default_cluster_tol(w)
    if tol <= 0:
        raise ValueError("cluster tolerance must be positive")
    return SpectralDecomposition(_readonly(w), _readonly(v), _clusters(w, tol), float(tol))


def apply_function(f: Callable, a, decomposition: SpectralDecomposition | None = None) -> np.ndarray:
    """``f(A) = U diag(f(lambda)) U*``."""
    d = decomposition if decomposition is not None else spectral_decompose(a)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(d.eigenvalues))
    vals = np.broadcast_to(vals, d.eigenvalues.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        offending = [float(x) for x in d.eigenvalues[bad]]
        raise DomainError(f"function undefined at eigenvalue(s) {offending}", offending)
    u = d.eigenvectors
    return (u * vals) @ u.conj().T


def schatten_norm(m, p=2.0) -> float:
    """Schatten ``p``-norm ``(sum s_i^p)^(1/p)`` of any complex matrix."""
    p = SchattenExponent.coerce(p).p
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    s = np.linalg.svd(m, compute_uv=False)
    if math.isinf(p):
        return float(s[0])
    if p == 2.0:
        return float(np.linalg.norm(m))
    smax = s[0]
    if smax == 0:
        return 0.0
    # rescale to avoid overflow in s**p
    return float(smax * np.sum((s / smax) ** p) ** (1.0 / p))


# -- matrix file format -------------------------------------------------------


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("cannot serialize non-finite matrix entry")
    return format(float(x), ".17g")


def matrix_to_json(m) -> str:
    m = np.asarray(m, dtype=complex)
    rows_re = ",\n    ".join("[" + ", ".join(_fmt(x) for x in row) + "]" for row in m.real)
    rows_im = ",\n    ".join("[" + ", ".join(_fmt(x) for x in row) + "]" for row in m.imag)
    return f'{{"dim": {m.shape[0]},\n  "re": [\n    {rows_re}],\n  "im": [\n    {rows_im}]}}\n'


def matrix_from_json(obj) -> np.ndarray:
    """Parse ``{"dim": n, "re": [[...]], "im": [[...]]}`` (``im`` optional)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(f"matrix entries do not match dim={n}")
    return re + 1j * im


def write_matrix(path, m) -> None:
    Path(path).write_text(matrix_to_json(m), encoding="utf-8")


def read_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
