import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from opint import (
    ClassFlags,
    DomainError,
    HermitianError,
    HermitianMatrix,
    ScalarFunction,
    SchattenExponent,
    apply_function,
    lookup,
    schatten_norm,
    spectral_decompose,
)
from opint.linalg import matrix_from_json, matrix_to_json, read_matrix, write_matrix

EPS = np.finfo(float).eps


def random_hermitian(rng, dim, scale=1.0):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianMatrix.from_array(scale * 0.5 * (g + g.conj().T))


def test_symmetrization_records_correction():
    m = np.array([[1.0, 2.0 + 1e-10], [2.0, 3.0]])
    h = HermitianMatrix.from_array(m)
    assert np.array_equal(h.data, h.data.conj().T)
    assert 0 < h.correction < 1e-9


def test_far_from_hermitian_rejected():
    with pytest.raises(HermitianError):
        HermitianMatrix.from_array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(HermitianError):
        HermitianMatrix.from_array(np.ones((2, 3)))
    with pytest.raises(HermitianError):
        HermitianMatrix.from_array([[np.nan]])


def test_hermitian_matrix_is_immutable():
    h = HermitianMatrix.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        h.data[0, 0] = 5.0


def test_schatten_exponent_validation():
    assert SchattenExponent.coerce("inf").p == math.inf
    assert SchattenExponent(2).times(3).p == 6.0
    for bad in (0.5, 0.0, float("nan"), -1):
        with pytest.raises(ValueError):
            SchattenExponent(bad)


def test_decompose_diagonal():
    d = spectral_decompose(HermitianMatrix.diag([2.0, 1.0]))
    assert d.eigenvalues.tolist() == [1.0, 2.0]
    assert d.clusters == ((0,), (1,))


def test_decompose_identity_single_cluster():
    d = spectral_decompose(np.eye(3), 1e-8)
    assert d.clusters == ((0, 1, 2),)
    assert np.allclose(d.projection(0), np.eye(3))


def test_decompose_reconstruction_and_unitarity():
    rng = np.random.default_rng(6)
    a = random_hermitian(rng, 6)
    d = spectral_decompose(a)
    u = d.eigenvectors
    assert np.linalg.norm(u.conj().T @ u - np.eye(6)) <= 10 * 6 * EPS
    assert np.linalg.norm(d.reconstruct() - a.data) <= 10 * 6 * EPS * np.linalg.norm(a.data)
    assert np.all(np.diff(d.eigenvalues) >= 0)


def test_decompose_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        spectral_decompose(np.eye(2), 0.0)


def test_cluster_values_use_means():
    a = HermitianMatrix.diag([1.0, 1.0 + 1e-12, 3.0])
    d = spectral_decompose(a)
    assert d.clusters == ((0, 1), (2,))
    vals = d.cluster_values()
    assert vals[0] == vals[1] == pytest.approx(1.0 + 5e-13, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, (5, 5), elements=st.floats(-10, 10)),
    arrays(np.float64, (5, 5), elements=st.floats(-10, 10)),
)
def test_decompose_invariants_property(re, im):
    m = re + 1j * im
    a = HermitianMatrix.from_array(0.5 * (m + m.conj().T))
    d = spectral_decompose(a)
    u = d.eigenvectors
    norm = max(np.linalg.norm(a.data), 1.0)
    assert np.linalg.norm(u.conj().T @ u - np.eye(5)) <= 10 * 5 * EPS * 10
    assert np.linalg.norm(d.reconstruct() - a.data) <= 10 * 5 * EPS * norm * 10
    # clusters are maximal runs with gaps below tol
    for c1, c2 in zip(d.clusters, d.clusters[1:]):
        assert d.eigenvalues[c2[0]] - d.eigenvalues[c1[-1]] >= d.tol


def test_apply_exp_diagonal():
    out = apply_function(lookup("exp"), HermitianMatrix.diag([0.0, math.log(2.0)]))
    assert np.allclose(out, np.diag([1.0, 2.0]), atol=1e-15)


def test_apply_identity_returns_input():
    rng = np.random.default_rng(1)
    a = random_hermitian(rng, 4)
    assert np.allclose(apply_function(lookup("monomial_1"), a), a.data, atol=1e-14)


def test_apply_exp_matches_taylor_series():
    rng = np.random.default_rng(11)
    a = random_hermitian(rng, 4, scale=0.7).data
    term, total, k = np.eye(4, dtype=complex), np.eye(4, dtype=complex), 0
    while np.linalg.norm(term) > 1e-20:
        k += 1
        term = term @ a / k
        total = total + term
    assert np.linalg.norm(apply_function(lookup("exp"), a) - total) <= 1e-10


def test_apply_function_domain_error():
    def deriv(k, x):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(x)

    recip = ScalarFunction("recip", deriv, 0, ClassFlags(0, False))
    with pytest.raises(DomainError) as info:
        apply_function(recip, HermitianMatrix.diag([0.0, 2.0]))
    assert info.value.eigenvalues == (0.0,)
    assert "0.0" in str(info.value)


def test_composition_on_diagonal_is_exact():
    lam = np.array([-1.0, 0.25, 2.0])
    a = HermitianMatrix.diag(lam)
    inner = apply_function(lambda x: x * x, a)
    outer = apply_function(np.exp, inner)
    direct = apply_function(lambda x: np.exp(x * x), a)
    assert np.array_equal(outer, direct)


def test_schatten_examples():
    assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0, rel=1e-15)
    assert schatten_norm(np.diag([1.0, -2.0]), 1) == pytest.approx(3.0, rel=1e-15)
    assert schatten_norm(np.diag([1.0, -2.0]), "inf") == pytest.approx(2.0, rel=1e-15)
    assert schatten_norm(np.zeros((0, 0)), 3) == 0.0
    assert schatten_norm(np.zeros((3, 3)), 3) == 0.0


def test_schatten_p4_trace_oracle():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    mm = m.conj().T @ m
    want = np.trace(mm @ mm).real ** 0.25
    assert schatten_norm(m, 4) == pytest.approx(want, rel=1e-13)


def test_schatten_hermitian_eigenvalue_formula():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = random_hermitian(rng, 6).data
        lam = np.linalg.eigvalsh(a)
        for p in (1.0, 1.5, 2.0, 3.0, 7.5):
            want = np.sum(np.abs(lam) ** p) ** (1 / p)
            assert schatten_norm(a, p) == pytest.approx(want, rel=1e-12)


def test_schatten_monotone_in_p():
    rng = np.random.default_rng(100)
    ps = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, math.inf]
    for _ in range(100):
        dim = int(rng.integers(1, 8))
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        norms = [schatten_norm(m, p) for p in ps]
        assert all(b <= a * (1 + 1e-13) for a, b in zip(norms, norms[1:]))


def test_schatten_large_p_no_overflow():
    m = np.diag([1e200, 1e200])
    assert schatten_norm(m, 4) == pytest.approx(1e200 * 2**0.25, rel=1e-12)


def test_matrix_json_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.array_equal(matrix_from_json(matrix_to_json(m)), m)
    path = tmp_path / "m.json"
    write_matrix(path, m)
    assert np.array_equal(read_matrix(path), m)


def test_matrix_json_optional_imaginary_and_errors():
    m = matrix_from_json({"dim": 2, "re": [[1, 2], [3, 4]]})
    assert m.dtype == complex and m[1, 0] == 3
    with pytest.raises(ValueError):
        matrix_from_json({"dim": 3, "re": [[1, 2], [3, 4]]})
    with pytest.raises(ValueError):
        matrix_from_json({"re": [[1]]})
