import json
import math

import numpy as np
import pytest

from opint.verification import (
    SUITES,
    InstanceGenerator,
    SpectrumProfile,
    UnknownSuiteError,
    default_params,
    run_identity_suite,
)


def test_profile_parse():
    assert SpectrumProfile.parse("clustered:1e-4") == SpectrumProfile("clustered", gap=1e-4)
    assert SpectrumProfile.parse("degenerate:3,2").multiplicities == (3, 2)
    assert SpectrumProfile.parse({"kind": "well_separated"}).kind == "well_separated"
    with pytest.raises(ValueError):
        SpectrumProfile.parse("lumpy")
    with pytest.raises(ValueError):
        SpectrumProfile("clustered", gap=0.0)


def test_generator_validation():
    with pytest.raises(ValueError):
        InstanceGenerator(dim=0)
    with pytest.raises(ValueError):
        InstanceGenerator(perturbation_scale=0.0)
    assert InstanceGenerator(seed=-1).seed == 2**64 - 1


def test_trial_streams_are_independent_of_order():
    gen = InstanceGenerator(seed=17, dim=4)
    forward = [gen.instance(t).hermitian().data for t in range(5)]
    backward = [gen.instance(t).hermitian().data for t in reversed(range(5))][::-1]
    for a, b in zip(forward, backward):
        assert np.array_equal(a, b)
    assert not np.array_equal(forward[1], forward[2])


def test_profile_cadence():
    gen = InstanceGenerator(seed=1)
    kinds = [gen.profile_for(t).kind for t in range(20)]
    assert kinds[0] == kinds[10] == "degenerate"
    assert kinds[5] == kinds[15] == "clustered"
    assert kinds[1] == "well_separated"


def test_degenerate_spectrum_has_repeats():
    inst = InstanceGenerator(seed=2, dim=6).instance(0)
    lam = inst.spectrum()
    assert len(np.unique(lam)) == 6 - 3
    a = inst.hermitian(lam)
    assert np.allclose(np.linalg.eigvalsh(a.data), np.sort(lam), atol=1e-13)


def test_clustered_spectrum_gap():
    inst = InstanceGenerator(seed=3, dim=6, spectrum_profile="clustered:1e-4").instance(1)
    lam = np.sort(inst.spectrum())
    gaps = np.diff(lam)
    assert np.sum(np.isclose(gaps, 1e-4, rtol=1e-6)) == 3
    assert np.all(np.abs(lam) <= 1.5)


def test_perturbation_norm_and_hermiticity():
    inst = InstanceGenerator(seed=4, dim=5, perturbation_scale=0.3).instance(2)
    x = inst.perturbation()
    assert np.linalg.norm(x) == pytest.approx(0.3)
    assert np.allclose(x, x.conj().T)
    y = inst.perturbation(hermitian=False, scale=2.0)
    assert np.linalg.norm(y) == pytest.approx(2.0)


def test_unknown_suite_and_params():
    gen = InstanceGenerator()
    with pytest.raises(UnknownSuiteError):
        run_identity_suite("nope", gen, 1)
    with pytest.raises(UnknownSuiteError):
        default_params("nope")
    with pytest.raises(ValueError):
        run_identity_suite("rank_one", gen, 1, params={"bogus": 1})
    with pytest.raises(ValueError):
        run_identity_suite("rank_one", gen, 0)


@pytest.mark.parametrize("name", sorted(SUITES))
def test_every_suite_runs_and_reports(name):
    rep = run_identity_suite(name, InstanceGenerator(seed=99, dim=4), 3)
    d = json.loads(rep.to_json())
    assert set(d) == {"suite", "seed", "trials", "params", "per_trial", "summary"}
    assert {"max", "median", "pass_rate"} <= set(d["summary"])
    for rec in d["per_trial"]:
        assert {"residual", "scale", "pass", "trial", "stream"} <= set(rec)
    assert rep.passed, d["summary"]


def test_tolerance_forms():
    gen = InstanceGenerator(seed=5, dim=4)
    rep = run_identity_suite("perturbation_telescope", gen, 2, tolerances=1e-3)
    assert rep.params["tolerance"] == 1e-3
    rep = run_identity_suite("perturbation_telescope", gen, 2, tolerances={"perturbation_telescope": 1e-4})
    assert rep.params["tolerance"] == 1e-4
    # impossible tolerance: the failure is reported, not raised
    rep = run_identity_suite("perturbation_telescope", gen, 3, tolerances=0.0, params={"orders": [2]})
    assert not rep.passed and rep.summary["failures"]


def test_report_regenerates_identically():
    gen = InstanceGenerator(seed=6, dim=4)
    r1 = run_identity_suite("remainder_representation", gen, 6)
    r2 = run_identity_suite("remainder_representation", gen, 6, threads=3)
    assert r1.to_json() == r2.to_json()


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("OPINT_THREADS", "2")
    gen = InstanceGenerator(seed=7, dim=4)
    assert run_identity_suite("engine_coincidence", gen, 4, threads=None).to_json() == run_identity_suite(
        "engine_coincidence", gen, 4
    ).to_json()


def test_bound_ratios_linear_symbol_equals_one():
    rep = run_identity_suite(
        "bound_ratios",
        InstanceGenerator(seed=8, dim=5),
        20,
        params={"symbols": ["monomial_1"], "orders": [1], "kind": "moi"},
    )
    ratios = np.array([r["residual"] for r in rep.per_trial])
    assert np.all(np.abs(ratios - 1.0) <= 1e-12)
    with pytest.raises(ValueError):
        run_identity_suite("bound_ratios", InstanceGenerator(), 1, params={"kind": "other"})


def test_grid_convergence_degenerate_profile():
    gen = InstanceGenerator(seed=9, dim=4, spectrum_profile="degenerate")
    rep = run_identity_suite("grid_convergence", gen, 4)
    assert rep.passed and rep.summary["max"] <= 1e-3


def test_ladder_override_echoed():
    rep = run_identity_suite("grid_convergence", InstanceGenerator(seed=10, dim=3), 2, params={"ladder": [1, 4, 64]})
    assert rep.params["ladder"] == [1, 4, 64]


def test_non_finite_values_serialize():
    rep = run_identity_suite("bound_ratios", InstanceGenerator(seed=11, dim=3), 2)
    d = rep.to_dict()
    assert d["params"]["tolerance"] == "inf"
    json.dumps(d, allow_nan=False)
    assert math.isfinite(d["summary"]["max_over_median"])
