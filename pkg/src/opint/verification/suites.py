"""Seeded identity suites over random Hermitian instances.

Every suite maps one :class:`TrialInstance` to a record holding the residual,
the scale it is measured against and a pass flag. Residual contracts are
relative: a trial passes when ``residual <= tol * scale``. Trials run
independently and are merged by trial index, so a report depends only on the
seed, the parameters and the trial count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..calculus import (
    DerivativeRequest,
    frechet_differential,
    identity_scale,
    perturbation_step,
    perturbation_telescope,
    rank_one_diagnostic,
    taylor_remainder,
)
from ..linalg import HermitianMatrix, apply_function, schatten_norm, spectral_decompose
from ..moi import GridSpec, MoiProblem, TensorSymbol, moi_bound_ratio, moi_grid, moi_spectral, moi_tensor
from ..scalar import lookup, polynomial
from .instances import InstanceGenerator, TrialInstance

__all__ = ["SUITES", "SuiteReport", "UnknownSuiteError", "default_params", "run_identity_suite"]

IDENTITY_SYMBOLS = ["exp", "sin", "gaussian", "logistic", "rational", "bump", "monomial_5"]


class UnknownSuiteError(KeyError):
    def __str__(self) -> str:
        return f"unknown suite {self.args[0]!r}; known: {sorted(SUITES)}"


@dataclass(frozen=True)
class _Suite:
    run: Callable[[TrialInstance, dict, float], dict]
    tol: float
    params: dict = field(default_factory=dict)


def _pick(inst: TrialInstance, params: dict) -> tuple[int, str]:
    """Order and symbol for a trial; orders cycle fastest so that every
    (order, symbol) pair appears."""
    orders, symbols = params["orders"], params["symbols"]
    n = int(orders[inst.trial % len(orders)])
    name = symbols[(inst.trial // len(orders)) % len(symbols)]
    return n, name


def _record(residual: float, scale: float, tol: float, **extra) -> dict:
    ok = bool(residual <= tol * scale)
    return {"residual": float(residual), "scale": float(scale), "pass": ok, **extra}


def _fro(m) -> float:
    return float(np.linalg.norm(m))


# -- suites ---------------------------------------------------------------------------


def _engine_coincidence(inst, params, tol):
    n = int(params["orders"][inst.trial % len(params["orders"])])
    degree = int(inst.rng.integers(max(n, 1), params["max_degree"] + 1))
    coeffs = inst.rng.standard_normal(degree + 1)
    f = polynomial(coeffs.tolist(), name=f"poly{degree}")
    ops = [inst.hermitian() for _ in range(n + 1)]
    xs = [inst.perturbation(hermitian=False) for _ in range(n)]
    spectral = moi_spectral(MoiProblem(f, tuple(ops), tuple(xs)))
    tensor = moi_tensor(TensorSymbol.divided_difference_of_polynomial(coeffs, n), ops, xs)
    return _record(_fro(spectral - tensor), identity_scale(f, n, ops, xs), tol, order=n, degree=degree)


def _grid_convergence(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    ops = [inst.hermitian() for _ in range(n + 1)]
    xs = [inst.perturbation(hermitian=False) for _ in range(n)]
    prob = MoiProblem(f, tuple(ops), tuple(xs))
    decs = [spectral_decompose(a) for a in ops]
    exact = moi_spectral(prob, decs)
    errors = []
    for r in params["ladder"]:
        res = moi_grid(prob, GridSpec(int(r)), decs)
        errors.append(schatten_norm(res.value - exact, params["p"]))
    scale = identity_scale(f, n, ops, xs)
    rec = _record(errors[-1], scale, tol, order=n, symbol=name, errors=errors)
    rec["pass"] = rec["pass"] and errors[-1] < errors[0]
    return rec


def _perturbation_step(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    fixed = [inst.hermitian() for _ in range(n - 1)]
    a, b = inst.hermitian(), inst.hermitian()
    xs = [inst.perturbation(hermitian=False) for _ in range(n - 1)]
    scale = identity_scale(f, n, fixed + [a, b], xs + [a.data - b.data])
    per_slot = []
    for slot in range(1, n + 1):
        lhs, rhs = perturbation_step(f, fixed, a, b, xs, slot)
        per_slot.append(_fro(lhs - rhs))
    return _record(max(per_slot), scale, tol, order=n, symbol=name, slot_residuals=per_slot)


def _perturbation_telescope(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    a, b = inst.hermitian(), inst.hermitian()
    xs = [inst.perturbation(hermitian=False) for _ in range(n - 1)]
    lhs, rhs = perturbation_telescope(f, a, b, xs)
    scale = identity_scale(f, n, [a, b], xs + [a.data - b.data])
    return _record(_fro(lhs - rhs), scale, tol, order=n, symbol=name)


def _remainder_representation(inst, params, tol):
    n, name = _pick(inst, params)
    zero_case = inst.trial % params["zero_case_every"] == params["zero_case_every"] - 1
    if zero_case:
        # degree <= n - 1: the remainder vanishes identically
        degree = int(inst.rng.integers(0, n))
        f = polynomial(inst.rng.standard_normal(degree + 1).tolist(), name=f"poly{degree}")
        name = f.name
    else:
        f = lookup(name)
    a = inst.hermitian()
    x = inst.perturbation(hermitian=True)
    rep = taylor_remainder(f, a, x, n, params["p"])
    if zero_case:
        apx = HermitianMatrix.from_array(a.data + x)
        scale = _fro(apply_function(f, apx)) + _fro(apply_function(f, a))
        residual = max(_fro(rep.remainder), _fro(rep.remainder_direct))
        return _record(residual, scale, params["zero_tol"], order=n, symbol=name, case="zero")
    scale = identity_scale(f, n, [a, a.data + x], [x] * n)
    return _record(rep.discrepancy, scale, tol, order=n, symbol=name, case="generic")


def _compression_identity(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    d = inst.dim
    inner = max(1, d // 2)
    m = params["cut"]
    # eigenvalues inside (-m, m) kept well away from 0 and from the cut, so the
    # compressed spectrum stays separated from the zero block
    signs = inst.rng.choice([-1.0, 1.0], size=d)
    mags = np.concatenate([inst.rng.uniform(0.3, 0.6, inner), inst.rng.uniform(1.0, 1.5, d - inner)])
    if inst.profile.kind == "degenerate":
        mags[1:inner] = mags[0]
        signs[1:inner] = signs[0]
    a = inst.hermitian(signs * mags)
    dec = spectral_decompose(a)
    u = dec.eigenvectors[:, np.abs(dec.eigenvalues) < m]
    proj = u @ u.conj().T
    k = inst.perturbation(hermitian=True, scale=params["k_scale"])
    pkp = proj @ k @ proj
    compressed = HermitianMatrix.from_array(proj @ a.data @ proj + pkp)
    shifted = HermitianMatrix.from_array(a.data + pkp)
    xs = [proj @ inst.perturbation(hermitian=False) @ proj for _ in range(n)]
    lhs = moi_spectral(MoiProblem(f, (compressed,) * (n + 1), tuple(xs)))
    rhs = moi_spectral(MoiProblem(f, (shifted,) * (n + 1), tuple(xs)))
    scale = identity_scale(f, n, [compressed, shifted], xs)
    return _record(_fro(lhs - rhs), scale, tol, order=n, symbol=name, rank=int(u.shape[1]))


def _rank_one(inst, params, tol):
    name = params["symbols"][inst.trial % len(params["symbols"])]
    f = lookup(name)
    lam = inst.spectrum(params["eigenvalues"])
    worst = None
    for m in params["orders"]:
        for t in params["shifts"]:
            res = float(np.max(rank_one_diagnostic(f, lam, int(m), float(t))))
            hull = (float(min(lam.min(), lam.min() + t)), float(max(lam.max(), lam.max() + t)))
            scale = f.sup_norm(int(m), hull)
            ratio = res / scale if scale > 0 else (0.0 if res == 0 else math.inf)
            if worst is None or ratio > worst[0]:
                worst = (ratio, res, scale, int(m), float(t))
    _, res, scale, m, t = worst
    return _record(res, scale, tol, symbol=name, worst_m=m, worst_t=t)


def _continuity(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    a = inst.hermitian()
    x = inst.perturbation(hermitian=True, scale=params["base_shift"])
    dirs = tuple(inst.perturbation(hermitian=False) for _ in range(n))
    base = frechet_differential(DerivativeRequest(f, a, dirs))
    deviations = []
    for j in range(params["halvings"] + 1):
        shifted = HermitianMatrix.from_array(a.data + x / 2**j)
        dev = frechet_differential(DerivativeRequest(f, shifted, dirs)) - base
        deviations.append(schatten_norm(dev, params["p"]))
    scale = identity_scale(f, n, [a, a.data + x], dirs)
    rec = _record(deviations[-1], scale, tol, order=n, symbol=name, deviations=deviations)
    rec["pass"] = rec["pass"] and deviations[-1] < deviations[0]
    return rec


def _bound_ratios(inst, params, tol):
    n, name = _pick(inst, params)
    f = lookup(name)
    p = params["p"]
    if params["kind"] == "remainder":
        a = inst.hermitian()
        x = inst.perturbation(hermitian=True)
        rep = taylor_remainder(f, a, x, n, p)
        ratio, extra = rep.ratio, {"norm": rep.remainder_norm_p, "bound_rhs": rep.bound_rhs}
    elif params["kind"] == "moi":
        ops = [inst.hermitian() for _ in range(n + 1)]
        xs = [inst.perturbation(hermitian=False) for _ in range(n)]
        ratio, extra = moi_bound_ratio(MoiProblem(f, tuple(ops), tuple(xs)), p), {}
    else:
        raise ValueError(f"bound_ratios kind must be 'moi' or 'remainder', got {params['kind']!r}")
    ok = bool(math.isfinite(ratio) and ratio >= 0)
    return {"residual": float(ratio), "scale": 1.0, "pass": ok, "order": n, "symbol": name, **extra}


SUITES: dict[str, _Suite] = {
    "engine_coincidence": _Suite(_engine_coincidence, 1e-9, {"orders": [1, 2, 3], "max_degree": 8}),
    "grid_convergence": _Suite(
        _grid_convergence,
        1e-3,
        {"orders": [1, 2], "symbols": ["exp", "sin", "gaussian"], "ladder": [2**k for k in range(11)], "p": 2.0},
    ),
    "perturbation_step": _Suite(_perturbation_step, 1e-9, {"orders": [1, 2, 3], "symbols": IDENTITY_SYMBOLS}),
    "perturbation_telescope": _Suite(
        _perturbation_telescope, 1e-9, {"orders": [1, 2, 3], "symbols": IDENTITY_SYMBOLS}
    ),
    "remainder_representation": _Suite(
        _remainder_representation,
        1e-9,
        {"orders": [1, 2, 3], "symbols": IDENTITY_SYMBOLS, "p": 2.0, "zero_case_every": 4, "zero_tol": 1e-12},
    ),
    "compression_identity": _Suite(
        _compression_identity, 1e-10, {"orders": [1, 2, 3], "symbols": IDENTITY_SYMBOLS, "cut": 0.8, "k_scale": 0.2}
    ),
    "rank_one": _Suite(
        _rank_one,
        1e-10,
        {"orders": [1, 2, 3], "shifts": [0.0, 0.1, 1.0], "eigenvalues": 8, "symbols": IDENTITY_SYMBOLS},
    ),
    "continuity": _Suite(
        _continuity,
        1e-6,
        {"orders": [1, 2], "symbols": IDENTITY_SYMBOLS, "halvings": 12, "base_shift": 1e-3, "p": 2.0},
    ),
    "bound_ratios": _Suite(
        _bound_ratios, math.inf, {"orders": [1], "symbols": IDENTITY_SYMBOLS, "p": 2.0, "kind": "remainder"}
    ),
}


def default_params(suite_name: str) -> dict:
    try:
        return json.loads(json.dumps(SUITES[suite_name].params))
    except KeyError:
        raise UnknownSuiteError(suite_name) from None


# -- reports ----------------------------------------------------------------------


def _finite(x):
    """JSON-safe copy with non-finite floats spelled as strings."""
    if isinstance(x, dict):
        return {str(k): _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return x


@dataclass
class SuiteReport:
    suite: str
    seed: int
    trials: int
    params: dict
    per_trial: list[dict]
    summary: dict

    @property
    def passed(self) -> bool:
        return self.summary["pass_rate"] == 1.0

    def to_dict(self) -> dict:
        return _finite(
            {
                "suite": self.suite,
                "seed": self.seed,
                "trials": self.trials,
                "params": self.params,
                "per_trial": self.per_trial,
                "summary": self.summary,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _summarize(per_trial: list[dict]) -> dict:
    rel = []
    for rec in per_trial:
        r, s = rec["residual"], rec["scale"]
        rel.append(r / s if s > 0 else (0.0 if r == 0 else math.inf))
    rel_arr = np.asarray(rel, dtype=float)
    passes = sum(1 for rec in per_trial if rec["pass"])
    out = {
        "max": float(np.max(rel_arr)) if len(rel) else 0.0,
        "median": float(np.median(rel_arr)) if len(rel) else 0.0,
        "max_abs": max((rec["residual"] for rec in per_trial), default=0.0),
        "pass_rate": passes / len(per_trial) if per_trial else 1.0,
        "failures": [rec["trial"] for rec in per_trial if not rec["pass"]],
    }
    return out


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("OPINT_THREADS", "1") or 1)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def run_identity_suite(
    suite_name: str,
    generator: InstanceGenerator,
    trials: int,
    tolerances: dict | float | None = None,
    params: dict | None = None,
    threads: int | None = 1,
) -> SuiteReport:
    """Run ``trials`` seeded trials of ``suite_name``.

    ``tolerances`` may be a number or ``{suite_name: tol}``; ``params``
    overrides the suite defaults and is echoed (merged) in the report.
    """
    if suite_name not in SUITES:
        raise UnknownSuiteError(suite_name)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    suite = SUITES[suite_name]
    tol = suite.tol
    if isinstance(tolerances, dict):
        tol = float(tolerances.get(suite_name, tol))
    elif tolerances is not None:
        tol = float(tolerances)
    merged = default_params(suite_name)
    unknown = set(params or {}) - set(merged)
    if unknown:
        raise ValueError(f"unknown parameter(s) for suite {suite_name!r}: {sorted(unknown)}")
    merged.update(params or {})

    def one(trial: int) -> dict:
        inst = generator.instance(trial)
        rec = suite.run(inst, merged, tol)
        return {"trial": trial, "stream": [generator.seed, trial], "profile": inst.profile.kind, **rec}

    workers = resolve_threads(threads)
    if workers == 1:
        per_trial = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(one, range(trials)))
    summary = _summarize(per_trial)
    if suite_name == "bound_ratios":
        ratios = [rec["residual"] for rec in per_trial]
        med = float(np.median(ratios))
        summary["max_over_median"] = float(np.max(ratios)) / med if med > 0 else math.inf
    report_params = {"generator": generator.to_dict(), "tolerance": tol, **merged}
    return SuiteReport(suite_name, generator.seed, trials, report_params, per_trial, summary)
