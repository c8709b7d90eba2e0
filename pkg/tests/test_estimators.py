import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ouest.cli import load_fixture, load_reference_estimates
from ouest.estimators import (
    ESTIMATORS,
    KnownContext,
    MissingParameterError,
    ObservationSample,
    ThetaRatioError,
    equidistribution_counts,
    estimate_mu,
    estimate_sigma_sq,
    estimate_theta,
    estimate_x0,
    running_trace,
    sample_mean,
)
from ouest.gauss_sim import GaussianDriver, gaussian_stream, inv_normal_cdf, weyl_uniform
from ouest.ou_model import OuParams, transition_law, transition_mean, transition_variance

REF = OuParams(theta=0.5, mu=-3.0, sigma=1.0, x0=3.0)
FULL = KnownContext(theta=0.5, mu=-3.0, sigma=1.0, x0=3.0)


@pytest.fixture(scope="module")
def fixture_sample():
    return ObservationSample(0.5, load_fixture())


@pytest.fixture(scope="module")
def reference():
    return load_reference_estimates()


def _ctx(kind):
    known = dict(theta=0.5, mu=-3.0, sigma=1.0, x0=3.0)
    known[{"sigma2": "sigma"}.get(kind, kind)] = None
    return KnownContext(**known)


def test_sample_validation():
    with pytest.raises(ValueError):
        ObservationSample(0.5, [])
    with pytest.raises(ValueError):
        ObservationSample(0.0, [1.0])
    with pytest.raises(ValueError):
        ObservationSample(0.5, [1.0, math.inf])


def test_fixture_spot_check_first_five():
    # mean of rows 1..5 is 2.38656; invert the mean formula by hand
    values = load_fixture()[:5]
    assert sample_mean(values) == pytest.approx(2.38656, abs=1e-12)
    by_hand = math.exp(0.25) * 2.38656 + 3 * math.exp(0.25) * (1 - math.exp(-0.25))
    assert estimate_x0(ObservationSample(0.5, values), _ctx("x0")) == pytest.approx(by_hand, abs=1e-12)


@pytest.mark.parametrize(
    "kind,n,expected",
    [
        ("x0", 5, 3.916479949),
        ("x0", 100, 2.90958959),
        ("mu", 5, 0.226753293),
        ("mu", 100, -3.318318028),
        ("theta", 5, 0.215705016),
        ("theta", 100, 0.530366173),
        ("sigma2", 5, 1.468059434),
        ("sigma2", 100, 1.070420297),
    ],
)
def test_point_estimates_on_fixture(fixture_sample, kind, n, expected):
    assert ESTIMATORS[kind](fixture_sample.head(n), _ctx(kind)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("kind", ["x0", "mu", "theta", "sigma2"])
def test_trace_reproduces_reference_rows(fixture_sample, reference, kind):
    trace = running_trace(fixture_sample, kind, _ctx(kind))
    for n, expected in reference[kind].items():
        assert trace.at(n) == pytest.approx(expected, abs=1e-6), (kind, n)


def test_printed_listing_differs_only_from_n30(reference):
    from ouest.cli import _fixture_path

    printed = ObservationSample(0.5, load_fixture(_fixture_path("observations_t05_listing.csv")))
    trace = running_trace(printed, "x0", _ctx("x0"))
    assert all(abs(trace.at(n) - reference["x0"][n]) < 1e-6 for n in (5, 10, 15, 20, 25))
    assert abs(trace.at(30) - reference["x0"][30]) > 0.01


@pytest.mark.parametrize("n", [1, 3, 7, 100])
def test_inversion_identities(n):
    m = transition_mean(REF, 0.5)
    sample = ObservationSample(0.5, [m] * n)
    assert estimate_x0(sample, _ctx("x0")) == pytest.approx(3.0, rel=1e-14)
    assert estimate_mu(sample, _ctx("mu")) == pytest.approx(-3.0, rel=1e-14)
    assert estimate_theta(sample, _ctx("theta")) == pytest.approx(0.5, rel=1e-13)
    assert estimate_sigma_sq(sample, _ctx("sigma2")) == 0.0


def test_missing_context():
    sample = ObservationSample(0.5, [1.0, 2.0])
    with pytest.raises(MissingParameterError):
        estimate_x0(sample, KnownContext(theta=0.5))
    with pytest.raises(MissingParameterError):
        estimate_theta(sample, KnownContext(x0=1.0, mu=1.0))


def test_theta_ratio_error_carries_ratio():
    # mean -4 lies on the far side of mu = -3
    sample = ObservationSample(0.5, [-4.0, -4.0])
    with pytest.raises(ThetaRatioError) as info:
        estimate_theta(sample, _ctx("theta"))
    assert info.value.ratio == pytest.approx(-1 / 6)


def test_theta_can_be_negative():
    # mean beyond x0 (ratio > 1) gives a negative rate estimate
    sample = ObservationSample(0.5, [3.5])
    assert estimate_theta(sample, _ctx("theta")) < 0


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=40), st.floats(-5, 5))
def test_x0_affine_in_shift(values, c):
    base = estimate_x0(ObservationSample(0.5, values), _ctx("x0"))
    shifted = estimate_x0(ObservationSample(0.5, [v + c for v in values]), _ctx("x0"))
    assert shifted - base == pytest.approx(c * math.exp(0.25), abs=1e-9)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_sigma_sq_nonnegative(values):
    assert estimate_sigma_sq(ObservationSample(0.5, values), _ctx("sigma2")) >= 0


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=60), st.sampled_from(["x0", "mu", "sigma2"]))
def test_trace_endpoint_bit_exact(values, kind):
    sample = ObservationSample(0.5, values)
    assert running_trace(sample, kind, _ctx(kind)).last == ESTIMATORS[kind](sample, _ctx(kind))


@given(st.lists(st.floats(-1, 6), min_size=1, max_size=60))
def test_theta_trace_endpoint_and_gaps(values):
    sample = ObservationSample(0.5, values)
    trace = running_trace(sample, "theta", _ctx("theta"))
    try:
        point = estimate_theta(sample, _ctx("theta"))
    except ThetaRatioError:
        assert len(values) in trace.gaps and math.isnan(trace.last)
    else:
        assert trace.last == point
    finite = ~np.isnan(trace.suffix_min)
    assert np.all(trace.suffix_min[finite] <= trace.suffix_max[finite])


def test_trace_suffix_extrema_brute_force(fixture_sample):
    trace = running_trace(fixture_sample, "x0", _ctx("x0"))
    sub = [trace.at(n) for n in range(5, 101, 5)]
    assert trace.spread(100) == 0.0
    assert trace.suffix_max[4] == max(trace.values[4:])
    assert trace.suffix_min[4] == min(trace.values[4:])
    # over the 20-point sub-trace: suffix extrema bracket every later sampled value
    for i, n in enumerate(range(5, 101, 5)):
        assert trace.suffix_min[n - 1] <= min(sub[i:]) <= max(sub[i:]) <= trace.suffix_max[n - 1]


def test_constant_trace():
    m = transition_mean(REF, 0.5)
    trace = running_trace(ObservationSample(0.5, [m] * 10), "mu", _ctx("mu"))
    assert np.allclose(trace.values, -3.0, rtol=1e-14)
    assert np.allclose(trace.suffix_min, trace.suffix_max)


def test_sample_order_preserved():
    sample = ObservationSample(0.5, [3.0, 1.0, 2.0])
    assert sample.values == (3.0, 1.0, 2.0)
    assert running_trace(sample, "x0", _ctx("x0")).at(1) == estimate_x0(sample.head(1), _ctx("x0"))


def test_consistency_monte_carlo():
    law = transition_law(REF, 0.5)
    n = 10**4
    z = law.sample(gaussian_stream(GaussianDriver.prng(99), n))
    sample = ObservationSample(0.5, z)
    var_t = transition_variance(REF, 0.5)
    growth = math.exp(0.25)
    decay = 1 - math.exp(-0.25)
    assert abs(estimate_x0(sample, _ctx("x0")) - 3) <= 4 * growth * math.sqrt(var_t / n)
    # delta-method scalings of the sample-mean error
    assert abs(estimate_mu(sample, _ctx("mu")) + 3) <= 4 * math.sqrt(var_t / n) / decay
    theta_slope = 1 / (0.5 * (law.mean + 3))
    assert abs(estimate_theta(sample, _ctx("theta")) - 0.5) <= 4 * theta_slope * math.sqrt(var_t / n)
    sigma_band = 5 * math.sqrt(2 / n) * var_t * (1.0 / (1 - math.exp(-0.5)))
    assert abs(estimate_sigma_sq(sample, _ctx("sigma2")) - 1) <= sigma_band


def test_equidistribution_counts_trivial():
    bins = equidistribution_counts([0.1, 0.9], [0.0, 0.5, 1.0])
    assert [(b.count, b.expected) for b in bins] == [(1, 1.0), (1, 1.0)]


def test_equidistribution_counts_closed_last_cell():
    bins = equidistribution_counts([0.0, 1.0, 1.5], [0.0, 0.5, 1.0])
    assert [b.count for b in bins] == [1, 1]


def test_equidistribution_counts_errors():
    with pytest.raises(ValueError):
        equidistribution_counts([], [0, 1])
    with pytest.raises(ValueError):
        equidistribution_counts([0.5], [1, 0])


def test_equidistribution_weyl_uniform_bins():
    bins = equidistribution_counts(weyl_uniform(1, 10**4), np.linspace(0, 1, 11))
    # independent exact-integer brute force count
    assert [b.count for b in bins] == [1001, 999, 1000, 1000, 1002, 998, 1000, 999, 1002, 999]
    assert all(abs(b.count - b.expected) <= 150 for b in bins)


def test_equidistribution_weyl_gaussian_deciles():
    from scipy.special import ndtr

    edges = np.concatenate(([-np.inf], inv_normal_cdf(np.arange(1, 10) / 10), [np.inf]))
    x = gaussian_stream(GaussianDriver.weyl(1), 10**4)
    bins = equidistribution_counts(x, edges, cdf=ndtr)
    assert all(abs(b.count - 1000) <= 150 for b in bins)
    assert all(b.expected == pytest.approx(1000) for b in bins)


@settings(max_examples=30)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
def test_equidistribution_counts_total(values):
    bins = equidistribution_counts(values, np.linspace(0, 1, 7))
    assert sum(b.count for b in bins) == len(values)
    assert sum(b.expected for b in bins) == pytest.approx(len(values))
