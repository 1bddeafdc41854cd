import ast
import math
from pathlib import Path

import numpy as np
import pytest

import opint
from opint import DerivativeRequest, HermitianMatrix, frechet_differential, identity_scale, lookup
from opint.verification import FdOracleSpec, InstanceGenerator, dd_bruteforce, fd_derivative, fd_mixed_derivative

ORACLE_FILE = Path(opint.__file__).parent / "verification" / "oracles.py"


def rand_h(rng, dim, scale=1.0):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianMatrix.from_array(scale * 0.5 * (g + g.conj().T))


def test_oracles_do_not_import_engines():
    tree = ast.parse(ORACLE_FILE.read_text())
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            imported |= {f"{node.module}.{a.name}" for a in node.names}
        elif isinstance(node, ast.Import):
            imported |= {a.name for a in node.names}
    forbidden = ("moi", "calculus", "divided_difference")
    assert not [name for name in imported if any(word in name for word in forbidden)], imported


def test_spec_validation():
    with pytest.raises(ValueError):
        FdOracleSpec(steps=(1e-3, 1e-2))
    with pytest.raises(ValueError):
        FdOracleSpec(steps=(1e-2, -1e-3))
    with pytest.raises(ValueError):
        FdOracleSpec(depth=-1)
    assert FdOracleSpec.for_order(3).steps[0] > FdOracleSpec.for_order(1).steps[0]


def test_fd_exact_on_quadratic():
    rng = np.random.default_rng(0)
    a, x = rand_h(rng, 4), rand_h(rng, 4).data
    res = fd_derivative(lookup("monomial_2"), a, x, 1)
    assert np.linalg.norm(res.value - (a.data @ x + x @ a.data)) <= 1e-10


def test_fd_cubic_second_order_at_zero():
    rng = np.random.default_rng(1)
    x = rand_h(rng, 3).data
    f = lookup("monomial_3")
    zero = HermitianMatrix.from_array(np.zeros((3, 3)))
    res = fd_derivative(f, zero, x, 2)
    # d^2/dt^2 (tX)^3 at t = 0 vanishes; the differential agrees
    d = frechet_differential(DerivativeRequest(f, zero, (x, x)))
    assert np.linalg.norm(res.value) <= 1e-9
    assert np.linalg.norm(d) <= 1e-12
    # away from zero the two agree as well
    a = rand_h(rng, 3)
    res = fd_derivative(f, a, x, 2)
    d = frechet_differential(DerivativeRequest(f, a, (x, x)))
    assert np.linalg.norm(res.value - d) <= max(res.error, 1e-9)


def test_fd_exp_third_order_estimate():
    inst = InstanceGenerator(seed=33, dim=5).instance(1)
    a = inst.hermitian()
    x = inst.perturbation()
    f = lookup("exp")
    res = fd_derivative(f, a, x, 3)
    scale = identity_scale(f, 3, [a], [x, x, x])
    assert res.reliable and res.error <= 1e-5 * scale
    d = frechet_differential(DerivativeRequest(f, a, (x, x, x)))
    assert np.linalg.norm(res.value - d) <= res.error


def test_mixed_derivative_matches_differential():
    rng = np.random.default_rng(2)
    f = lookup("sin")
    a = rand_h(rng, 4)
    xs = [rand_h(rng, 4).data for _ in range(2)]
    res = fd_mixed_derivative(f, a, xs)
    d = frechet_differential(DerivativeRequest(f, a, tuple(xs)))
    assert res.reliable
    assert np.linalg.norm(res.value - d) <= res.error


def test_unreliable_flag_when_sweep_grows():
    # steps far too coarse for a fast oscillation: differences do not shrink
    f = lookup("sin", a=40.0)
    a = HermitianMatrix.diag([0.0, 1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = fd_derivative(f, a, x, 1, FdOracleSpec(steps=(1.0, 0.5, 0.25, 0.125), depth=1))
    assert not res.reliable


def test_roundoff_dominated_sweep_has_large_estimate():
    f = lookup("exp")
    a = HermitianMatrix.diag([0.0, 1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = fd_derivative(f, a, x, 3, FdOracleSpec(steps=(1e-6, 5e-7, 2.5e-7, 1.25e-7), depth=0))
    assert res.error > 1e3


def test_fd_rejects_order_zero():
    with pytest.raises(ValueError):
        fd_derivative(lookup("exp"), np.eye(2), np.eye(2), 0)
    with pytest.raises(ValueError):
        fd_mixed_derivative(lookup("exp"), np.eye(2), [])


def test_bruteforce_examples():
    assert dd_bruteforce(lookup("exp"), [0.0, 0.0]) == pytest.approx(1.0, rel=1e-12)
    assert dd_bruteforce(lookup("monomial_4"), [1.0] * 5) == pytest.approx(1.0, rel=1e-9)
    assert dd_bruteforce(lookup("monomial_2"), [1.0, 2.0]) == pytest.approx(3.0, rel=1e-15)
    assert dd_bruteforce(lookup("exp"), [0.5]) == pytest.approx(math.exp(0.5), rel=1e-15)


def test_bruteforce_requires_mp_evaluator():
    f = lookup("exp")
    bare = type(f)(f.name, f.deriv, f.max_order, f.flags)
    with pytest.raises(ValueError):
        dd_bruteforce(bare, [0.0, 1.0])


def test_bruteforce_matches_divided_difference_small_sample():
    rng = np.random.default_rng(3)
    for f in opint.builtin_catalog():
        for _ in range(20):
            nodes = rng.uniform(-2, 2, 3)
            got = opint.divided_difference(f, nodes)
            want = dd_bruteforce(f, nodes)
            denom = max(abs(want), f.sup_norm(2, (nodes.min(), nodes.max())) / 2, 1e-300)
            assert abs(got - want) <= 1e-9 * denom + 1e-14
