"""Oracles, seeded instance generation and identity suites."""

from .instances import InstanceGenerator, SpectrumProfile, TrialInstance
from .oracles import FdOracleSpec, FdResult, dd_bruteforce, fd_derivative, fd_mixed_derivative
from .suites import SUITES, SuiteReport, UnknownSuiteError, default_params, run_identity_suite

__all__ = [
    "FdOracleSpec",
    "FdResult",
    "InstanceGenerator",
    "SUITES",
    "SpectrumProfile",
    "SuiteReport",
    "TrialInstance",
    "UnknownSuiteError",
    "dd_bruteforce",
    "default_params",
    "fd_derivative",
    "fd_mixed_derivative",
    "run_identity_suite",
]
