"""Exit criteria for the package, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary ends
with one PASS/FAIL line per criterion.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from ouest.cli import dumps_report, load_fixture, load_reference_estimates, reproduce_tables
from ouest.experiments import (
    REFERENCE_PARAMS,
    ExperimentConfig,
    run_consistency,
    run_covariance_check,
    run_equidistribution_check,
    run_moment_check,
)
from ouest.gauss_sim import GaussianDriver, inv_normal_cdf, sample_observations
from ouest.ou_model import transition_law, transition_variance

SEED = 2024
T = 0.5
MEAN_REF = 1.672805
VAR_REF = 0.39347
COV_REF = 0.1951987


def _fourier_report(seed):
    z = sample_observations(REFERENCE_PARAMS, T, 10**4, GaussianDriver.prng(seed), sampler="fourier")
    law = transition_law(REFERENCE_PARAMS, T)
    ks = stats.kstest(z, law.cdf)
    return {"ks": ks.statistic, "p": ks.pvalue, "var": float(z.var(ddof=1)),
            "values_sha": __import__("hashlib").sha256(z.tobytes()).hexdigest()}


def _consistency_cfg():
    return ExperimentConfig(sample_sizes=(100, 1000, 10000), replications=200,
                            driver=GaussianDriver.prng(SEED))


@pytest.fixture(scope="module")
def runs():
    """First-pass reports for criteria 2-5, reused by the determinism check."""
    return {}


def test_ac1_table_reproduction(criterion):
    start = time.perf_counter()
    tables = reproduce_tables(load_fixture())
    elapsed = time.perf_counter() - start
    reference = load_reference_estimates()
    worst = max(abs(v - reference[k][n]) for k, rows in tables.items() for n, v in rows)
    count = sum(len(rows) for rows in tables.values())
    criterion(f"80 entries, max abs err {worst:.1e} (tol 1e-6), {elapsed:.3f}s")
    assert count == 80
    assert worst <= 1e-6
    assert elapsed < 1.0


def test_ac2_moment_agreement(criterion, runs):
    start = time.perf_counter()
    r = run_moment_check(REFERENCE_PARAMS, T, 10**5, GaussianDriver.prng(SEED))
    elapsed = time.perf_counter() - start
    runs[2] = dumps_report(r.to_dict())
    band = 4 * math.sqrt(VAR_REF / 10**5)
    criterion(f"mean dev {r.sample_mean - MEAN_REF:+.2e} (tol {band:.2e}), "
              f"var rel dev {r.sample_var / VAR_REF - 1:+.3f} (tol 0.05), {elapsed:.2f}s")
    assert abs(r.sample_mean - MEAN_REF) <= band
    assert abs(r.sample_var / VAR_REF - 1) <= 0.05
    assert elapsed < 5


def test_ac3_covariance_agreement(criterion, runs):
    start = time.perf_counter()
    r = run_covariance_check(REFERENCE_PARAMS, 0.25, 0.5, 10**5, GaussianDriver.prng(SEED))
    elapsed = time.perf_counter() - start
    runs[3] = dumps_report(r.to_dict())
    criterion(f"cov {r.sample_cov:.5f} vs {COV_REF} rel dev {r.sample_cov / COV_REF - 1:+.3f} "
              f"(tol 0.05), {elapsed:.2f}s")
    assert abs(r.sample_cov / COV_REF - 1) <= 0.05
    assert elapsed < 10


def test_ac4_fourier_sampler_fidelity(criterion, runs):
    start = time.perf_counter()
    rep = _fourier_report(SEED)
    elapsed = time.perf_counter() - start
    runs[4] = json.dumps(rep, sort_keys=True)
    var = transition_variance(REFERENCE_PARAMS, T)
    crit = 1.63 / math.sqrt(10**4)
    criterion(f"KS {rep['ks']:.4f} (crit {crit:.4f}, p={rep['p']:.2f}), "
              f"var rel dev {rep['var'] / var - 1:+.3f} (tol 0.05), {elapsed:.2f}s")
    assert rep["ks"] < crit
    assert rep["p"] > 0.01
    assert abs(rep["var"] / var - 1) <= 0.05
    assert elapsed < 30


def test_ac5_estimator_consistency(criterion, runs):
    start = time.perf_counter()
    report = run_consistency(_consistency_cfg())
    elapsed = time.perf_counter() - start
    runs[5] = dumps_report(report.to_dict())
    var = transition_variance(REFERENCE_PARAMS, T)
    clt = math.exp(REFERENCE_PARAMS.theta * T) * math.sqrt(var / 10**4)
    x0_large = report.row("x0", 10**4).rmse
    ratios = {k: report.row(k, 10**4).rmse / report.row(k, 100).rmse for k in ("x0", "mu", "theta", "sigma2")}
    theta_failures = report.row("theta", 10**4).failures
    criterion(f"rmse(1e4)/rmse(1e2) max {max(ratios.values()):.3f}, x0 rmse/CLT "
              f"{x0_large / clt:.3f} (tol 0.3), theta failures {theta_failures}, {elapsed:.1f}s")
    assert all(r < 1 for r in ratios.values())
    assert abs(x0_large / clt - 1) <= 0.30
    assert theta_failures == 0
    assert elapsed < 60


def test_ac6_inverse_cdf_accuracy(criterion):
    u = (np.arange(10**4) + 0.5) / 10**4
    x = inv_normal_cdf(u)
    cdf_err = float(np.max(np.abs(ndtr(x) - u)))
    anti = float(np.max(np.abs(x + inv_normal_cdf(1.0 - u))))
    criterion(f"max |Phi(x)-u| {cdf_err:.1e} (tol 1e-9), antisymmetry {anti:.1e} (tol 1e-12)")
    assert cdf_err <= 1e-9
    assert anti <= 1e-12


def test_ac7_equidistribution(criterion):
    worst = 0.0
    for k in range(1, 6):
        for target in ("uniform", "gaussian"):
            r = run_equidistribution_check(GaussianDriver.weyl(k), 10**4, 10, target)
            worst = max(worst, r.max_abs_std_dev)
    criterion(f"Weyl k=1..5, max standardized deviation {worst:.3f} (tol 5)")
    assert worst <= 5


def test_ac8_determinism(criterion, runs):
    missing = {2, 3, 4, 5} - set(runs)
    if missing:
        pytest.skip(f"needs criteria {sorted(missing)} in the same session")
    again = {
        2: dumps_report(run_moment_check(REFERENCE_PARAMS, T, 10**5, GaussianDriver.prng(SEED)).to_dict()),
        3: dumps_report(run_covariance_check(REFERENCE_PARAMS, 0.25, 0.5, 10**5, GaussianDriver.prng(SEED)).to_dict()),
        4: json.dumps(_fourier_report(SEED), sort_keys=True),
        5: dumps_report(run_consistency(_consistency_cfg(), workers=4).to_dict()),
    }
    same = [k for k in (2, 3, 4, 5) if again[k] == runs[k]]
    criterion(f"byte-identical re-runs for criteria {same} (criterion 5 re-run with 4 workers)")
    assert same == [2, 3, 4, 5]
