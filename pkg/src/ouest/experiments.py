"""Monte Carlo checks of the samplers and estimators against closed forms.

Every report is a plain dataclass with ``to_dict()``; the dict carries the
hash of the configuration that produced it, so two reports can be compared
byte-for-byte after JSON serialisation.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from . import __version__
from .estimators import (
    ESTIMATORS,
    KnownContext,
    ObservationSample,
    ThetaRatioError,
    canonical_kind,
    equidistribution_counts,
)
from .gauss_sim import (
    DEFAULT_TRUNCATION,
    GaussianDriver,
    inv_normal_cdf,
    sample_observations,
    simulate_paths,
)
from .ou_model import OuParams, covariance, transition_mean, transition_variance

REFERENCE_PARAMS = OuParams(theta=0.5, mu=-3.0, sigma=1.0, x0=3.0)
REFERENCE_TIME = 0.5


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _driver_spec(driver: GaussianDriver) -> dict:
    return driver.describe()


def _true_value(params: OuParams, kind: str) -> float:
    if kind == "sigma2":
        return params.sigma**2
    return getattr(params, kind)


@dataclass(frozen=True)
class ExperimentConfig:
    params: OuParams = REFERENCE_PARAMS
    t: float = REFERENCE_TIME
    sample_sizes: tuple[int, ...] = (100, 1000, 10000)
    replications: int = 200
    driver: GaussianDriver = field(default_factory=lambda: GaussianDriver.prng(2024))
    truncation: int = DEFAULT_TRUNCATION
    estimators: tuple[str, ...] = ("x0", "mu", "theta", "sigma2")
    sampler: str = "exact"

    def __post_init__(self) -> None:
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or sizes[0] < 1 or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sample_sizes must be strictly increasing positive integers")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.t > 0:
            raise ValueError("observation time must be > 0")
        if self.sampler not in ("exact", "fourier"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        object.__setattr__(self, "sample_sizes", sizes)
        object.__setattr__(self, "estimators", tuple(canonical_kind(k) for k in self.estimators))

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "t": self.t,
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "driver": _driver_spec(self.driver),
            "truncation": self.truncation,
            "estimators": list(self.estimators),
            "sampler": self.sampler,
        }

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass(frozen=True)
class ConsistencyRow:
    estimator: str
    n: int
    mean_abs_error: float
    rmse: float
    failures: int
    replications: int


@dataclass(frozen=True)
class ConsistencyReport:
    config: dict
    config_hash: str
    rows: tuple[ConsistencyRow, ...]

    def row(self, estimator: str, n: int) -> ConsistencyRow:
        estimator = canonical_kind(estimator)
        for r in self.rows:
            if r.estimator == estimator and r.n == n:
                return r
        raise KeyError((estimator, n))

    def to_dict(self) -> dict:
        return {
            "kind": "consistency",
            "version": __version__,
            "config_hash": self.config_hash,
            "config": self.config,
            "results": [asdict(r) for r in self.rows],
        }


def _replicate(cfg: ExperimentConfig, ctx: KnownContext, rep: int) -> dict:
    """Errors of every estimator at every size for one replication.

    Replication ``rep`` draws from child stream ``rep`` of the configured
    driver; smaller samples are prefixes of the largest one.
    """
    driver = cfg.driver.spawn(rep)
    z = sample_observations(
        cfg.params, cfg.t, cfg.sample_sizes[-1], driver, cfg.sampler, cfg.truncation
    )
    values = z.tolist()
    out = {}
    for n in cfg.sample_sizes:
        sample = ObservationSample(cfg.t, values[:n])
        for kind in cfg.estimators:
            try:
                err = ESTIMATORS[kind](sample, ctx) - _true_value(cfg.params, kind)
            except ThetaRatioError:
                err = None
            out[kind, n] = err
    return out


def run_consistency(cfg: ExperimentConfig, workers: int = 1) -> ConsistencyReport:
    """Replicated estimation errors per estimator and sample size.

    Replications run on ``workers`` threads but are reduced in replication
    order, so the report does not depend on ``workers``. Rate-estimator
    failures are counted, not raised, and excluded from the error moments.
    """
    p = cfg.params
    ctx = KnownContext(theta=p.theta, mu=p.mu, sigma=p.sigma, x0=p.x0)
    reps = range(cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _replicate(cfg, ctx, r), reps))
    else:
        results = [_replicate(cfg, ctx, r) for r in reps]

    rows = []
    for kind in cfg.estimators:
        for n in cfg.sample_sizes:
            errs = [res[kind, n] for res in results if res[kind, n] is not None]
            failures = cfg.replications - len(errs)
            if errs:
                mae = math.fsum(abs(e) for e in errs) / len(errs)
                rmse = math.sqrt(math.fsum(e * e for e in errs) / len(errs))
            else:
                mae = rmse = math.nan
            rows.append(ConsistencyRow(kind, n, mae, rmse, failures, cfg.replications))
    return ConsistencyReport(cfg.to_dict(), cfg.hash, tuple(rows))


@dataclass(frozen=True)
class MomentReport:
    config_hash: str
    config: dict
    n: int
    sample_mean: float
    sample_var: float
    expected_mean: float
    expected_var: float
    z_mean: float
    z_var: float
    flagged: bool

    def to_dict(self) -> dict:
        body = asdict(self)
        return {
            "kind": "moments",
            "version": __version__,
            "config_hash": body.pop("config_hash"),
            "config": body.pop("config"),
            "results": [body],
        }


def _zscore(dev: float, se: float) -> float:
    if se > 0:
        return dev / se
    return 0.0 if dev == 0 else math.copysign(math.inf, dev)


def _centred_moments(z: np.ndarray) -> tuple[float, float]:
    anchor = float(z[0])
    d = (z - anchor).tolist()
    mean_d = math.fsum(d) / len(d)
    var = math.fsum((v - mean_d) ** 2 for v in d) / (len(d) - 1)
    return anchor + mean_d, var


def run_moment_check(
    params: OuParams,
    t: float,
    n: int,
    driver: GaussianDriver,
    sampler: str = "exact",
    trunc: int = DEFAULT_TRUNCATION,
) -> MomentReport:
    """Sample mean and variance of ``n`` observations versus the closed forms.

    ``z_var`` standardises the variance deviation by the Gaussian standard
    error ``var * sqrt(2 / (n - 1))``. ``flagged`` is set when either
    ``|z|`` exceeds 4.
    """
    if n < 2:
        raise ValueError("need at least two observations")
    config = {
        "params": asdict(params), "t": t, "n": n, "driver": _driver_spec(driver),
        "sampler": sampler, "truncation": trunc,
    }
    z = sample_observations(params, t, n, driver, sampler, trunc)
    mean, var = _centred_moments(z)
    m, v = transition_mean(params, t), transition_variance(params, t)
    z_mean = _zscore(mean - m, math.sqrt(v / n))
    z_var = _zscore(var - v, v * math.sqrt(2.0 / (n - 1)))
    flagged = abs(z_mean) > 4 or abs(z_var) > 4
    return MomentReport(config_hash(config), config, n, mean, var, m, v, z_mean, z_var, flagged)


@dataclass(frozen=True)
class CovarianceReport:
    config_hash: str
    config: dict
    n_paths: int
    sample_cov: float
    expected_cov: float
    std_error: float
    z: float
    flagged: bool

    def to_dict(self) -> dict:
        body = asdict(self)
        return {
            "kind": "covariance",
            "version": __version__,
            "config_hash": body.pop("config_hash"),
            "config": body.pop("config"),
            "results": [body],
        }


def run_covariance_check(
    params: OuParams, s: float, t: float, n_paths: int, driver: GaussianDriver
) -> CovarianceReport:
    """Sample covariance of ``(x_s, x_t)`` across exact paths versus the closed form.

    The standard error is the plug-in one for a mean of centred products,
    ``sd((x_s - xbar_s)(x_t - xbar_t)) / sqrt(n)``; deviations beyond 5 of
    them are flagged. ``s == t`` reduces to a variance check.
    """
    if not 0 < s <= t:
        raise ValueError("need 0 < s <= t")
    config = {"params": asdict(params), "s": s, "t": t, "n_paths": n_paths,
              "driver": _driver_spec(driver)}
    grid = (s,) if s == t else (s, t)
    paths = simulate_paths(params, grid, n_paths, driver)
    xs, xt = paths[:, 0], paths[:, -1]
    ds = (xs - math.fsum(xs.tolist()) / n_paths).tolist()
    dt = (xt - math.fsum(xt.tolist()) / n_paths).tolist()
    prods = [a * b for a, b in zip(ds, dt)]
    cov = math.fsum(prods) / (n_paths - 1)
    pm = math.fsum(prods) / n_paths
    se = math.sqrt(math.fsum((q - pm) ** 2 for q in prods) / (n_paths - 1) / n_paths)
    expected = covariance(params, s, t)
    z = _zscore(cov - expected, se)
    return CovarianceReport(config_hash(config), config, n_paths, cov, expected, se, z, abs(z) > 5)


@dataclass(frozen=True)
class EquidistributionReport:
    config_hash: str
    config: dict
    bins: tuple[dict, ...]
    max_abs_std_dev: float

    def to_dict(self) -> dict:
        return {
            "kind": "equidistribution",
            "version": __version__,
            "config_hash": self.config_hash,
            "config": self.config,
            "max_abs_std_dev": self.max_abs_std_dev,
            "results": list(self.bins),
        }


def gaussian_decile_edges(n_bins: int = 10) -> np.ndarray:
    inner = inv_normal_cdf(np.arange(1, n_bins) / n_bins)
    return np.concatenate(([-np.inf], inner, [np.inf]))


def equidistribution_report(seq, n_bins: int = 10, target: str = "uniform", config: dict | None = None):
    """Bin counts of ``seq`` against the uniform law on [0, 1] or the standard normal.

    Deviations are standardised by the binomial sd ``sqrt(n p (1 - p))``.
    Uniform bins are equal-width; Gaussian bins are equal-probability.
    """
    if target == "uniform":
        counts = equidistribution_counts(seq, np.linspace(0.0, 1.0, n_bins + 1))
        # equal widths: avoid the rounding in diff(linspace)
        counts = [replace(b, expected=len(np.asarray(seq).ravel()) / n_bins) for b in counts]
    elif target == "gaussian":
        counts = equidistribution_counts(seq, gaussian_decile_edges(n_bins), cdf=ndtr)
    else:
        raise ValueError(f"unknown target {target!r}")
    n = len(np.asarray(seq).ravel())
    bins = []
    worst = 0.0
    for b in counts:
        p = b.expected / n
        sd = math.sqrt(n * p * (1 - p))
        dev = _zscore(b.count - b.expected, sd)
        worst = max(worst, abs(dev))
        bins.append({"lo": b.lo, "hi": b.hi, "count": b.count, "expected": b.expected,
                     "std_dev": dev})
    config = dict(config or {}, n=n, bins=n_bins, target=target)
    return EquidistributionReport(config_hash(config), config, tuple(bins), worst)


def run_equidistribution_check(
    driver: GaussianDriver, n: int, bins: int = 10, target: str = "uniform"
) -> EquidistributionReport:
    """Draw ``n`` values from ``driver`` and bin them (uniforms or normals per ``target``)."""
    spec = _driver_spec(driver)
    seq = driver.uniforms(n) if target == "uniform" else driver.normals(n)
    return equidistribution_report(seq, bins, target, {"driver": spec})
