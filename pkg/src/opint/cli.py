"""Command-line runner.

    opint derivative --config cfg.json --out report.json
    opint suite --set suite=perturbation_telescope --set trials=100 --seed 42

The configuration is one JSON document; ``--set a.b=VALUE`` overrides any leaf
(``VALUE`` is parsed as JSON when possible, else kept as a string). Without
``--out`` the JSON report goes to stdout and the table to stderr.

Exit codes: 0 success, 1 failing suite trials, 2 usage or configuration
error, 3 numerical or capability error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .calculus import DerivativeRequest, frechet_differential, gateaux_derivative, taylor_remainder
from .linalg import (
    DomainError,
    HermitianError,
    HermitianMatrix,
    SchattenExponent,
    SpectralError,
    matrix_from_json,
    schatten_norm,
)
from .moi import DegenerateInputError, GridSpec, MoiProblem, moi_grid, moi_spectral
from .scalar import CapabilityError, lookup
from .verification.instances import InstanceGenerator
from .verification.suites import SUITES, resolve_threads, run_identity_suite

EXIT_OK, EXIT_SUITE_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("derivative", "gateaux", "remainder", "moi", "suite")


class ConfigError(ValueError):
    pass


# -- configuration --------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects KEY=VALUE, got {assignment!r}")
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {key!r}: {part!r} is not an object")
        node = nxt
    node[parts[-1]] = _parse_value(raw)


def load_config(args) -> tuple[dict, Path]:
    config: dict = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            config = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        base = path.resolve().parent
    for assignment in args.set or []:
        apply_override(config, assignment)
    if args.seed is not None:
        config["seed"] = args.seed
    return config, base


def _matrix(source, base: Path, what: str) -> np.ndarray:
    """Inline ``{"dim", "re", "im"}``, ``{"diag": [...]}``, a nested list, or
    a path to a matrix file (relative paths resolve against the config)."""
    if isinstance(source, str):
        path = Path(source)
        if not path.is_absolute():
            path = base / path
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"{what}: matrix file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{what}: matrix file {path} is not valid JSON: {exc}") from None
        return _matrix(obj, base, f"{what} ({path})")
    try:
        if isinstance(source, dict) and "diag" in source:
            return np.diag(np.asarray(source["diag"], dtype=float)).astype(complex)
        if isinstance(source, dict):
            return matrix_from_json(source)
        m = np.asarray(source, dtype=complex)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{what}: {exc}") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{what}: expected a square matrix, got shape {m.shape}")
    return m


def _hermitian(source, base: Path, what: str) -> HermitianMatrix:
    try:
        return HermitianMatrix.from_array(_matrix(source, base, what))
    except HermitianError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"missing config key {key!r}")
    return config[key]


def _symbol(config: dict):
    spec = _require(config, "symbol")
    if isinstance(spec, str):
        spec = {"name": spec}
    try:
        return lookup(spec["name"], float(spec.get("a", 1.0)), float(spec.get("b", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad symbol spec {spec!r}: {exc}") from None


def _order(config: dict, default=None) -> int:
    n = config.get("order", default)
    if n is None:
        raise ConfigError("missing config key 'order'")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"order must be an integer >= 1, got {n!r}")
    return n


def _exponents(config: dict) -> list[SchattenExponent]:
    raw = config.get("p", [2.0])
    raw = raw if isinstance(raw, list) else [raw]
    try:
        return [SchattenExponent.coerce(p) for p in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _p_key(p: SchattenExponent) -> str:
    return "inf" if math.isinf(p.p) else repr(p.p)


def _norms(m, ps) -> dict:
    return {_p_key(p): schatten_norm(m, p) for p in ps}


def _matrix_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0], "re": m.real.tolist(), "im": m.imag.tolist()}


# -- commands ---------------------------------------------------------------------------


def cmd_derivative(config: dict, base: Path, threads: int) -> tuple[dict, list, int]:
    f = _symbol(config)
    a = _hermitian(_require(config, "base"), base, "base")
    dirs = _require(config, "directions")
    if not isinstance(dirs, list) or not dirs:
        raise ConfigError("'directions' must be a non-empty list of matrices")
    k = _order(config, default=len(dirs))
    if len(dirs) == 1 and k > 1:
        dirs = dirs * k
    if len(dirs) != k:
        raise ConfigError(f"order {k} needs {k} directions, got {len(dirs)}")
    xs = tuple(_matrix(d, base, f"directions[{i}]") for i, d in enumerate(dirs))
    ps = _exponents(config)
    d = frechet_differential(DerivativeRequest(f, a, xs))
    norms = _norms(d, ps)
    result = {"symbol": f.name, "order": k, "norms": norms, "value": _matrix_json(d)}
    rows = [("symbol", f.name), ("order", k)] + [(f"|D|_{p}", v) for p, v in norms.items()]
    return result, rows, EXIT_OK


def cmd_gateaux(config: dict, base: Path, threads: int) -> tuple[dict, list, int]:
    f = _symbol(config)
    a = _hermitian(_require(config, "base"), base, "base")
    x = _hermitian(_require(config, "direction"), base, "direction")
    n = _order(config)
    ps = _exponents(config)
    d = gateaux_derivative(f, a, x, n)
    norms = _norms(d, ps)
    result = {"symbol": f.name, "order": n, "norms": norms, "value": _matrix_json(d)}
    rows = [("symbol", f.name), ("order", n)] + [(f"|D_G|_{p}", v) for p, v in norms.items()]
    return result, rows, EXIT_OK


def cmd_remainder(config: dict, base: Path, threads: int) -> tuple[dict, list, int]:
    f = _symbol(config)
    a = _hermitian(_require(config, "base"), base, "base")
    x = _hermitian(_require(config, "direction"), base, "direction")
    n = _order(config)
    p = _exponents(config)[0]
    rep = taylor_remainder(f, a, x, n, p)
    result = {
        "symbol": f.name,
        "order": n,
        "p": _p_key(p),
        "remainder_norm_p": rep.remainder_norm_p,
        "bound_rhs": rep.bound_rhs,
        "ratio": rep.ratio,
        "discrepancy": rep.discrepancy,
        "remainder": _matrix_json(rep.remainder),
        "remainder_direct": _matrix_json(rep.remainder_direct),
    }
    rows = [
        ("symbol", f.name),
        ("order", n),
        (f"|R|_{_p_key(p)}", rep.remainder_norm_p),
        ("bound_rhs", rep.bound_rhs),
        ("ratio", rep.ratio),
        ("discrepancy", rep.discrepancy),
    ]
    return result, rows, EXIT_OK


def cmd_moi(config: dict, base: Path, threads: int) -> tuple[dict, list, int]:
    f = _symbol(config)
    ops = _require(config, "operators")
    xs = config.get("perturbations", [])
    if not isinstance(ops, list) or not isinstance(xs, list):
        raise ConfigError("'operators' and 'perturbations' must be lists")
    prob = MoiProblem(
        f,
        tuple(_hermitian(o, base, f"operators[{i}]") for i, o in enumerate(ops)),
        tuple(_matrix(x, base, f"perturbations[{i}]") for i, x in enumerate(xs)),
    )
    ps = _exponents(config)
    engine = config.get("engine", "spectral")
    result = {"symbol": f.name, "order": prob.order, "engine": engine}
    if engine == "spectral":
        value = moi_spectral(prob)
    elif engine == "grid":
        grid = config.get("grid") or {}
        try:
            spec = GridSpec(int(grid.get("resolution", 64)), grid.get("cell_range"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid spec: {exc}") from None
        res = moi_grid(prob, spec)
        value = res.value
        result.update(
            {
                "resolution": spec.resolution,
                "cell_range": res.cell_range,
                "covered": res.covered,
                "terms": res.terms,
                "warnings": list(res.warnings),
            }
        )
    else:
        raise ConfigError(f"engine must be 'spectral' or 'grid', got {engine!r}")
    result["norms"] = _norms(value, ps)
    result["value"] = _matrix_json(value)
    rows = [("symbol", f.name), ("order", prob.order), ("engine", engine)]
    rows += [(f"|T|_{p}", v) for p, v in result["norms"].items()]
    return result, rows, EXIT_OK


def cmd_suite(config: dict, base: Path, threads: int) -> tuple[dict, list, int]:
    name = _require(config, "suite")
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    trials = config.get("trials", 100)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    gen_cfg = dict(config.get("generator") or {})
    try:
        gen = InstanceGenerator(
            seed=int(config.get("seed", 0)),
            dim=int(gen_cfg.get("dim", 6)),
            spectrum_profile=gen_cfg.get("spectrum_profile", "well_separated"),
            perturbation_scale=float(gen_cfg.get("perturbation_scale", 1.0)),
        )
        report = run_identity_suite(
            name, gen, trials, config.get("tolerance"), config.get("params") or {}, threads
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (CapabilityError, DomainError, HermitianError)):
            raise
        raise ConfigError(str(exc)) from None
    summary = report.summary
    result = report.to_dict()
    rows = [
        ("suite", name),
        ("seed", report.seed),
        ("trials", trials),
        ("max", summary["max"]),
        ("median", summary["median"]),
        ("pass_rate", summary["pass_rate"]),
    ]
    if "max_over_median" in summary:
        rows.append(("max_over_median", summary["max_over_median"]))
    return result, rows, EXIT_OK if report.passed else EXIT_SUITE_FAILED


HANDLERS = {
    "derivative": cmd_derivative,
    "gateaux": cmd_gateaux,
    "remainder": cmd_remainder,
    "moi": cmd_moi,
    "suite": cmd_suite,
}


# -- output ---------------------------------------------------------------------------


def _cell(v) -> str:
    # floats use repr so the table text matches the JSON encoding
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def format_table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {_cell(v)}" for k, v in rows) + "\n"


def report_json(command: str, config: dict, result: dict) -> str:
    doc = {
        "command": command,
        "config": config,
        "result": result,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    directory = path.resolve().parent
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opint", description="Derivatives of Hermitian matrix functions via multiple operator integrals."
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="JSON experiment config")
    parser.add_argument("--set", action="append", metavar="KEY=VAL", help="override a config leaf (dotted path)")
    parser.add_argument("--seed", type=int, help="seed for suites")
    parser.add_argument("--out", metavar="PATH", help="write the JSON report here (atomic)")
    parser.add_argument("--threads", type=int, help="worker threads for suites (default $OPINT_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config, base = load_config(args)
        threads = resolve_threads(args.threads)
        snapshot = copy.deepcopy(config)
        result, rows, code = HANDLERS[args.command](config, base, threads)
    except ConfigError as exc:
        print(f"opint: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, (CapabilityError, DomainError, DegenerateInputError)):
            print(f"opint: numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"opint: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpectralError, ArithmeticError) as exc:
        print(f"opint: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = report_json(args.command, _json_safe(snapshot), _json_safe(result))
    table = format_table(rows)
    if args.out:
        try:
            write_atomic(Path(args.out), text)
        except OSError as exc:
            print(f"opint: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        sys.stdout.write(table)
    else:
        sys.stderr.write(table)
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
