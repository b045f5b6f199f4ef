import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from levy_loewner.driver import DriverSpec, JumpModel, make_rng, sample_values
from levy_loewner.stats import (circular_align, circular_ks, convergence_diagnostic, ecf_test,
                                ks_two_sample, limit_test, predicted_slit_length,
                                reversal_test, run_ensemble, simulate)

POISSON = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.5), 2.0)
REPORT_KEYS = {"test_id", "inputs", "statistics", "verdict"}


def _check_schema(rep):
    assert REPORT_KEYS <= set(rep) and rep["verdict"] in ("pass", "fail")
    json.dumps({k: rep[k] for k in REPORT_KEYS})


def test_simulation_is_seeded():
    a = simulate(POISSON, 1.0, seed=3, index=1)
    b = simulate(POISSON, 1.0, seed=3, index=1)
    c = simulate(POISSON, 1.0, seed=3, index=2)
    assert a.chain == b.chain and a.boundary == b.boundary
    assert a.chain != c.chain


def test_continuous_driver_simulation_is_flagged_approximate():
    sim = simulate(DriverSpec.brownian(1.0), 0.2, seed=0)
    assert sim.boundary.approximate and len(sim.chain) == 20


def test_ensemble_is_deterministic_and_matches_simulate():
    names = ("diameter", "events", "level", "capacity")
    a = run_ensemble(POISSON, 1.0, 4, names, master_seed=9)
    b = run_ensemble(POISSON, 1.0, 4, names, master_seed=9)
    assert a.to_records() == b.to_records()
    one = run_ensemble(POISSON, 1.0, 1, ("events",), master_seed=9)
    assert one.values("events")[0] == len(simulate(POISSON, 1.0, 9, 0).chain)
    np.testing.assert_array_equal(a.values("capacity"), 1.0)
    assert np.all((a.values("diameter") >= 0.99) & (a.values("diameter") <= 4.04))


def test_ensemble_workers_do_not_change_results():
    a = run_ensemble(POISSON, 1.0, 3, ("events", "diameter"), master_seed=2)
    b = run_ensemble(POISSON, 1.0, 3, ("events", "diameter"), master_seed=2, workers=2)
    assert a.to_records() == b.to_records()


def test_ensemble_rejects_unknown_functional():
    with pytest.raises(ValueError):
        run_ensemble(POISSON, 1.0, 2, ("area",))
    with pytest.raises(ValueError):
        run_ensemble(POISSON, 1.0, 0)


def test_ecf_accepts_own_law_and_rejects_wrong_parameter():
    y = sample_values(POISSON, 1.0, 100_000, make_rng(1))
    rep = ecf_test(y, POISSON, band=4 / math.sqrt(y.size))
    _check_schema(rep)
    assert rep["verdict"] == "pass"
    wrong = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.5), 3.0)
    assert ecf_test(y, wrong)["verdict"] == "fail"


def test_ecf_degenerate_constant_driver():
    rep = ecf_test(np.zeros(50), DriverSpec.constant())
    assert rep["verdict"] == "pass"
    assert all(r["error"] == 0.0 for r in rep["statistics"]["coefficients"])


def test_ecf_self_consistency_with_estimated_coefficients():
    a = sample_values(POISSON, 1.0, 50_000, make_rng(2))
    b = sample_values(POISSON, 1.0, 50_000, make_rng(3))
    est = [np.mean(np.exp(1j * n * b)) for n in range(1, 6)]
    # the difference of two estimates has twice the variance
    assert ecf_test(a, POISSON, theoretical=est, band=4 * math.sqrt(2 / a.size))["verdict"] == "pass"


def test_ks_identical_and_shifted_samples():
    rng = make_rng(4)
    a = rng.normal(size=2000)
    same = ks_two_sample(a, a)
    assert same.statistic == 0.0 and same.pvalue == 1.0
    b = rng.normal(1.0, 1.0, 2000)
    assert ks_two_sample(a, b).pvalue < 1e-6


def test_ks_null_pvalues_are_uniform():
    p = []
    for i in range(400):
        rng = make_rng(5, i)
        p.append(ks_two_sample(rng.normal(size=300), rng.normal(size=300)).pvalue)
    counts = np.histogram(p, bins=10, range=(0, 1))[0]
    # asymptotic p-values are slightly conservative; a chi-square decile test tolerates that
    assert sps.chisquare(counts).pvalue > 1e-3


def test_circular_alignment_removes_common_rotation():
    rng = make_rng(6)
    a = rng.vonmises(0.0, 2.0, 5000)
    b = rng.vonmises(0.0, 2.0, 5000)
    base = circular_ks(a, b)
    turned = circular_ks(a + 3.0, b + 3.0)
    assert turned.statistic == pytest.approx(base.statistic, abs=1e-3)
    x, y = circular_align(a + 3.0, b + 3.0)
    assert np.all(np.abs(x) <= math.pi) and np.all(np.abs(y) <= math.pi)


def test_reversal_is_rotation_invariant():
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.5), 5.0)
    a = reversal_test(spec, N=2000, batches=3, required=2, master_seed=1)
    b = reversal_test(spec, N=2000, batches=3, required=2, master_seed=1, rotation=1.7)
    _check_schema(a)
    assert a["verdict"] == b["verdict"] == "pass"
    for ra, rb in zip(a["statistics"]["batches"], b["statistics"]["batches"]):
        for ca, cb in zip(ra["checkpoints"], rb["checkpoints"]):
            assert ca["marginal_D"] == pytest.approx(cb["marginal_D"], abs=2e-3)


def test_reversal_control_with_asymmetric_jumps_fails():
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.9), 5.0)
    rep = reversal_test(spec, N=2000, batches=3, required=2, flip=False, jump_shift=0.5)
    assert rep["verdict"] == "fail"
    with pytest.raises(ValueError):
        reversal_test(DriverSpec.brownian(1.0))


def test_convergence_diagnostic_identities():
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 10.0)
    rep = convergence_diagnostic(spec, [0.5, 0.5], "events", N=20)
    _check_schema(rep)
    assert rep["statistics"]["ks_distance"][0][1] == 0.0
    cap = convergence_diagnostic(spec, [0.2, 0.5], "capacity", N=5)
    assert cap["statistics"]["ks_distance"][0][1] == 0.0
    with pytest.raises(ValueError):
        convergence_diagnostic(spec, [0.5, 0.2], "events", N=2)


def test_convergence_diagnostic_diameter_runs():
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 10.0)
    rep = convergence_diagnostic(spec, [0.5, 1.0], "diameter", N=6, relative_tol=2e-2)
    d = rep["values"]
    assert d.shape == (2, 6) and np.all((d > 0.98) & (d < 4.05))


def test_predicted_slit_length():
    assert predicted_slit_length(0.0) == 0.0
    assert predicted_slit_length(math.log(2) / 2, "paper") == pytest.approx(4.82842712474619, rel=1e-14)


def test_limit_cauchy_and_sle_pass():
    c = limit_test("cauchy", N=20_000)
    _check_schema(c)
    assert c["verdict"] == "pass"
    s = limit_test("sle", N=20_000)
    _check_schema(s)
    assert s["verdict"] == "pass"
    assert s["statistics"]["target_variance"] == pytest.approx(0.2)
    with pytest.raises(ValueError):
        limit_test("gauss")


def test_limit_deterministic_report_shape():
    rep = limit_test("deterministic", {"r": 0.9999}, N=2)
    _check_schema(rep)
    rows = rep["statistics"]["replicates"]
    assert len(rows) == 2 and all(math.isfinite(r["d_H"]) for r in rows)
    assert rep["inputs"]["predicted_delta"] == pytest.approx(predicted_slit_length(1.0))
