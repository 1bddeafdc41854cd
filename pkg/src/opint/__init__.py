"""Higher-order derivatives of functions of Hermitian matrices through
multiple operator integrals, with independent numerical oracles."""

from .calculus import (
    DerivativeRequest,
    TaylorReport,
    frechet_differential,
    gateaux_derivative,
    identity_scale,
    perturbation_step,
    perturbation_telescope,
    rank_one_diagnostic,
    taylor_remainder,
)
from .linalg import (
    DomainError,
    HermitianError,
    HermitianMatrix,
    SchattenExponent,
    SpectralDecomposition,
    SpectralError,
    apply_function,
    schatten_norm,
    spectral_decompose,
)
from .moi import (
    DegenerateInputError,
    GridSpec,
    MoiProblem,
    TensorSymbol,
    moi_bound_ratio,
    moi_grid,
    moi_spectral,
    moi_tensor,
)
from .scalar import (
    CapabilityError,
    ClassFlags,
    ScalarFunction,
    builtin_catalog,
    divided_difference,
    divided_difference_table,
    lookup,
    polynomial,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "ClassFlags",
    "DegenerateInputError",
    "DerivativeRequest",
    "DomainError",
    "GridSpec",
    "HermitianError",
    "HermitianMatrix",
    "MoiProblem",
    "ScalarFunction",
    "SchattenExponent",
    "SpectralDecomposition",
    "SpectralError",
    "TaylorReport",
    "TensorSymbol",
    "apply_function",
    "builtin_catalog",
    "divided_difference",
    "divided_difference_table",
    "frechet_differential",
    "gateaux_derivative",
    "identity_scale",
    "lookup",
    "moi_bound_ratio",
    "moi_grid",
    "moi_spectral",
    "moi_tensor",
    "perturbation_step",
    "perturbation_telescope",
    "polynomial",
    "rank_one_diagnostic",
    "schatten_norm",
    "spectral_decompose",
    "taylor_remainder",
]
