"""Cross-sectional plug-in estimators of the OU parameters.

Each estimator takes ``n`` independent observations of ``x_t`` at one time
``t`` and recovers one parameter with the other three known:

============  ======================================================================
``x0``        ``e^{theta t} zbar - mu (e^{theta t} - 1)``
``mu``        ``(zbar - x0 e^{-theta t}) / (1 - e^{-theta t})``
``theta``     ``-(1/t) ln((zbar - mu) / (x0 - mu))``
``sigma2``    ``2 theta sum (z_k - m_t)^2 / (n (1 - e^{-2 theta t}))``
============  ======================================================================

Sums are exactly rounded (``math.fsum``), so results do not depend on
summation order and running traces agree bit-for-bit with the point
estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np


class EstimationError(ValueError):
    """An estimator is undefined on the given sample."""


class ThetaRatioError(EstimationError):
    """``(zbar - mu) / (x0 - mu) <= 0``: the log in the rate estimator is undefined."""

    def __init__(self, ratio: float, n: int | None = None):
        self.ratio = ratio
        self.n = n
        where = "" if n is None else f" at n={n}"
        super().__init__(f"rate estimator undefined{where}: ratio {ratio!r} <= 0")


class MissingParameterError(ValueError):
    """The known-parameter context lacks something the estimator needs."""


@dataclass(frozen=True)
class ObservationSample:
    """Ordered observations ``z_1..z_n`` at time ``t``; order is preserved."""

    t: float
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sample must contain at least one value")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sample values must be finite")
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValueError(f"observation time must be > 0, got {self.t!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t", float(self.t))

    def __len__(self) -> int:
        return len(self.values)

    def head(self, n: int) -> "ObservationSample":
        return ObservationSample(self.t, self.values[:n])


@dataclass(frozen=True)
class KnownContext:
    """Parameters treated as known; the one being estimated may be left ``None``."""

    theta: float | None = None
    mu: float | None = None
    sigma: float | None = None
    x0: float | None = None

    def require(self, *names: str) -> tuple[float, ...]:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingParameterError(f"missing known parameter(s): {', '.join(missing)}")
        return tuple(float(getattr(self, n)) for n in names)


def sample_mean(values: Sequence[float]) -> float:
    """Mean as ``z_1 + fsum(z_k - z_1) / n``: exact for constant samples."""
    anchor = values[0]
    return anchor + math.fsum(v - anchor for v in values) / len(values)


def _coerce(sample) -> ObservationSample:
    if isinstance(sample, ObservationSample):
        return sample
    raise TypeError("expected an ObservationSample")


# Each estimator is written in terms of (sum of centred values, n) so the trace
# below can feed it exact prefix sums.

def _x0_from_mean(zbar: float, t: float, ctx: KnownContext) -> float:
    theta, mu = ctx.require("theta", "mu")
    growth = math.exp(theta * t)
    return growth * zbar - mu * math.expm1(theta * t)


def _mu_from_mean(zbar: float, t: float, ctx: KnownContext) -> float:
    theta, x0 = ctx.require("theta", "x0")
    denom = -math.expm1(-theta * t)
    if denom <= 0:
        raise EstimationError("equilibrium estimator needs theta * t > 0")
    return (zbar - x0 * math.exp(-theta * t)) / denom


def _theta_from_mean(zbar: float, t: float, ctx: KnownContext, n: int | None = None) -> float:
    x0, mu = ctx.require("x0", "mu")
    if x0 == mu:
        raise MissingParameterError("rate estimator requires x0 != mu")
    ratio = (zbar - mu) / (x0 - mu)
    if not ratio > 0:
        raise ThetaRatioError(ratio, n)
    return -math.log(ratio) / t


def _reference_mean(t: float, ctx: KnownContext) -> float:
    theta, mu, x0 = ctx.require("theta", "mu", "x0")
    return x0 * math.exp(-theta * t) + mu * -math.expm1(-theta * t)


def _sigma_sq_scale(t: float, ctx: KnownContext) -> float:
    (theta,) = ctx.require("theta")
    denom = -math.expm1(-2.0 * theta * t)
    if denom <= 0:
        raise EstimationError("volatility estimator needs theta * t > 0")
    return 2.0 * theta / denom


def estimate_x0(sample: ObservationSample, ctx: KnownContext) -> float:
    s = _coerce(sample)
    return _x0_from_mean(sample_mean(s.values), s.t, ctx)


def estimate_mu(sample: ObservationSample, ctx: KnownContext) -> float:
    s = _coerce(sample)
    return _mu_from_mean(sample_mean(s.values), s.t, ctx)


def estimate_theta(sample: ObservationSample, ctx: KnownContext) -> float:
    """Rate estimate; raises :class:`ThetaRatioError` when the log argument is <= 0."""
    s = _coerce(sample)
    return _theta_from_mean(sample_mean(s.values), s.t, ctx, len(s))


def estimate_sigma_sq(sample: ObservationSample, ctx: KnownContext) -> float:
    s = _coerce(sample)
    m = _reference_mean(s.t, ctx)
    ss = math.fsum((v - m) ** 2 for v in s.values)
    return _sigma_sq_scale(s.t, ctx) * ss / len(s)


ESTIMATORS: dict[str, Callable[[ObservationSample, KnownContext], float]] = {
    "x0": estimate_x0,
    "mu": estimate_mu,
    "theta": estimate_theta,
    "sigma2": estimate_sigma_sq,
}

# Parameter each estimator targets, for looking up true values.
TARGETS = {"x0": "x0", "mu": "mu", "theta": "theta", "sigma2": "sigma_sq"}


def canonical_kind(kind: str) -> str:
    kind = {"sigma_sq": "sigma2", "sigma^2": "sigma2"}.get(kind, kind)
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown estimator {kind!r}; choose from {sorted(ESTIMATORS)}")
    return kind


@dataclass(frozen=True)
class EstimateTrace:
    """Running estimates ``T_1..T_n`` with suffix minima/maxima.

    ``values[i]`` is the estimate on the first ``i + 1`` observations; NaN marks
    a prefix where the estimator is undefined (see ``gaps``). ``suffix_min[i]``
    and ``suffix_max[i]`` are the min/max of ``values[i:]`` ignoring gaps: the
    finite-sample stand-ins for liminf and limsup.
    """

    kind: str
    values: np.ndarray
    suffix_min: np.ndarray
    suffix_max: np.ndarray
    gaps: tuple[int, ...] = ()

    @property
    def last(self) -> float:
        return float(self.values[-1])

    def at(self, n: int) -> float:
        """Estimate on the first ``n`` observations."""
        return float(self.values[n - 1])

    def spread(self, n: int) -> float:
        """``suffix_max - suffix_min`` over ``T_n..T_N``."""
        return float(self.suffix_max[n - 1] - self.suffix_min[n - 1])


def _exact_prefix_sums(terms: Sequence[float]) -> list[float]:
    """Correctly rounded prefix sums; equal to ``math.fsum`` of each prefix."""
    acc = Fraction(0)
    out = []
    for v in terms:
        acc += Fraction(v)
        out.append(float(acc))
    return out


def _suffix_extrema(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rev = values[::-1]
    lo = np.fmin.accumulate(np.where(np.isnan(rev), np.inf, rev))[::-1]
    hi = np.fmax.accumulate(np.where(np.isnan(rev), -np.inf, rev))[::-1]
    # suffixes made only of gaps
    lo = np.where(np.isinf(lo) & (lo > 0), np.nan, lo)
    hi = np.where(np.isinf(hi) & (hi < 0), np.nan, hi)
    return lo, hi


def running_trace(sample: ObservationSample, kind: str, ctx: KnownContext) -> EstimateTrace:
    """Evaluate estimator ``kind`` on every prefix of ``sample``.

    Prefixes on which the rate estimator is undefined are recorded as gaps.
    """
    s = _coerce(sample)
    kind = canonical_kind(kind)
    t = s.t
    n = len(s)
    values = np.empty(n)
    gaps = []
    if kind == "sigma2":
        m = _reference_mean(t, ctx)
        scale = _sigma_sq_scale(t, ctx)
        sums = _exact_prefix_sums([(v - m) ** 2 for v in s.values])
        for i, ss in enumerate(sums):
            values[i] = scale * ss / (i + 1)
    else:
        anchor = s.values[0]
        sums = _exact_prefix_sums([v - anchor for v in s.values])
        for i, cs in enumerate(sums):
            zbar = anchor + cs / (i + 1)
            try:
                if kind == "x0":
                    values[i] = _x0_from_mean(zbar, t, ctx)
                elif kind == "mu":
                    values[i] = _mu_from_mean(zbar, t, ctx)
                else:
                    values[i] = _theta_from_mean(zbar, t, ctx, i + 1)
            except ThetaRatioError:
                values[i] = np.nan
                gaps.append(i + 1)
    lo, hi = _suffix_extrema(values)
    return EstimateTrace(kind, values, lo, hi, tuple(gaps))


@dataclass(frozen=True)
class BinCount:
    lo: float
    hi: float
    count: int
    expected: float


def equidistribution_counts(seq, edges, cdf: Callable | None = None) -> list[BinCount]:
    """Counting measure of each cell of a partition versus its expectation.

    Cells are ``[e_i, e_{i+1})`` except the last, which is closed. Expected
    counts are ``n (F(b) - F(a))`` for the given CDF ``F``, or ``n`` times the
    cell's share of the edges' span when no CDF is given. Values outside the
    edges are not counted.
    """
    x = np.asarray(seq, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sequence is empty")
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise ValueError("edges must be a strictly increasing sequence of >= 2 values")
    n = x.size
    idx = np.searchsorted(e, x, side="right") - 1
    idx[x == e[-1]] = e.size - 2
    inside = (idx >= 0) & (idx < e.size - 1)
    counts = np.bincount(idx[inside], minlength=e.size - 1)
    if cdf is None:
        if not np.all(np.isfinite(e)):
            raise ValueError("uniform expectations need finite edges")
        probs = np.diff(e) / (e[-1] - e[0])
    else:
        probs = np.diff(np.asarray(cdf(e), dtype=float))
        if np.any(probs < 0):
            raise ValueError("cdf must be nondecreasing")
    return [
        BinCount(float(e[i]), float(e[i + 1]), int(counts[i]), float(n * probs[i]))
        for i in range(e.size - 1)
    ]
