"""Gaussian draws, random Fourier-series Brownian motion and OU samplers.

Two sources of standard-normal draws sit behind :class:`GaussianDriver`:

* ``prng``: a seeded PCG64 stream of 64-bit words, mapped to uniforms in (0, 1)
  and transported by :func:`inv_normal_cdf`;
* ``weyl``: the equidistributed sequence ``y_j = frac(j sqrt(p_k))`` for the
  k-th prime ``p_k``, transported the same way.

Both arms are addressable by ``(kind, key, cursor)``, so any position of any
stream can be reproduced without replaying it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .ou_model import OuParams, exact_step, transition_law, transition_mean

DEFAULT_TRUNCATION = 800

# Acklam's rational approximation to the normal quantile (relative error < 1.15e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lower_quantile(q: np.ndarray) -> np.ndarray:
    """Quantile for ``0 < q <= 0.5`` (the result is <= 0)."""
    x = np.empty_like(q)
    tail = q < _P_LOW
    if tail.any():
        r = np.sqrt(-2.0 * np.log(q[tail]))
        num = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
        den = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
        x[tail] = num / den
    mid = ~tail
    if mid.any():
        s = q[mid] - 0.5
        r = s * s
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    # one Halley step against the erfc-based CDF
    e = ndtr(x) - q
    u = e * _SQRT_2PI * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inv_normal_cdf(u):
    """Standard normal quantile function.

    Accepts a scalar or an array of probabilities strictly inside (0, 1) and
    raises ``ValueError`` otherwise. Upper-half inputs are reflected, so
    ``inv_normal_cdf(1 - u) == -inv_normal_cdf(u)`` up to the rounding of
    ``1 - u``.
    """
    arr = np.asarray(u, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValueError("inv_normal_cdf is defined on the open interval (0, 1)")
    flat = np.atleast_1d(arr).ravel()
    upper = flat > 0.5
    q = np.where(upper, 1.0 - flat, flat)
    x = _lower_quantile(q)
    x = np.where(upper, -x, x).reshape(arr.shape)
    if arr.ndim == 0:
        return float(x)
    return x


def nth_prime(k: int) -> int:
    """The k-th prime, 1-based (``nth_prime(1) == 2``)."""
    if k < 1:
        raise ValueError(f"prime index must be >= 1, got {k}")
    if k < 6:
        return (2, 3, 5, 7, 11)[k - 1]
    bound = int(k * (math.log(k) + math.log(math.log(k)))) + 1
    sieve = np.ones(bound + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, math.isqrt(bound) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    return int(np.flatnonzero(sieve)[k - 1])


def weyl_uniform(k: int, n: int, start: int = 0) -> np.ndarray:
    """``frac(j * sqrt(p_k))`` for ``j = start+1, ..., start+n``.

    Only the fractional part of ``sqrt(p_k)`` enters the product, which keeps
    the full 53-bit mantissa for the fractional digits. Indices beyond
    ``2**52 / sqrt(p_k)`` are rejected: the products no longer carry any
    fractional information.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    root = math.sqrt(nth_prime(k))
    last = start + n
    if last > 2.0**52 / root:
        raise OverflowError(
            f"index {last} too large for stream {k}: fractional part lost in float64"
        )
    frac = root - math.floor(root)
    j = np.arange(start + 1, last + 1, dtype=np.float64)
    return np.mod(j * frac, 1.0)


@dataclass
class GaussianDriver:
    """Reproducible source of standard-normal draws.

    ``kind`` is ``"prng"`` (``key`` is the seed) or ``"weyl"`` (``key`` is the
    1-based prime index). ``cursor`` counts draws already consumed; the same
    ``(kind, key, cursor)`` always yields the same next draw. A driver is owned
    by one task at a time. Use :meth:`clone` or :meth:`spawn` to hand streams
    to other tasks.
    """

    kind: str
    key: int
    cursor: int = 0
    _bitgen: np.random.PCG64 | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("prng", "weyl"):
            raise ValueError(f"unknown driver kind {self.kind!r}")
        self.key = int(self.key)
        if self.kind == "prng" and self.key < 0:
            raise ValueError("seed must be >= 0")
        if self.kind == "weyl" and self.key < 1:
            raise ValueError("Weyl stream index must be >= 1")
        if self.cursor < 0:
            raise ValueError("cursor must be >= 0")

    @classmethod
    def prng(cls, seed: int, cursor: int = 0) -> "GaussianDriver":
        return cls("prng", seed, cursor)

    @classmethod
    def weyl(cls, stream: int, cursor: int = 0) -> "GaussianDriver":
        return cls("weyl", stream, cursor)

    def clone(self, cursor: int | None = None) -> "GaussianDriver":
        return GaussianDriver(self.kind, self.key, self.cursor if cursor is None else cursor)

    def spawn(self, index: int) -> "GaussianDriver":
        """Independent child stream number ``index`` (at cursor 0).

        PRNG children get a seed derived through ``SeedSequence``; Weyl children
        move to stream ``key + index``.
        """
        if index < 0:
            raise ValueError("spawn index must be >= 0")
        if self.kind == "weyl":
            return GaussianDriver.weyl(self.key + index)
        words = np.random.SeedSequence(self.key, spawn_key=(index,)).generate_state(2, np.uint64)
        return GaussianDriver.prng(int(words[0]) << 64 | int(words[1]))

    def describe(self) -> dict:
        return {"kind": self.kind, "key": self.key, "cursor": self.cursor}

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` values in (0, 1); advances the cursor."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.empty(0)
        if self.kind == "weyl":
            out = weyl_uniform(self.key, n, start=self.cursor)
        else:
            if self._bitgen is None:
                self._bitgen = np.random.PCG64(self.key)
                self._bitgen.advance(self.cursor)
            raw = self._bitgen.random_raw(n)
            # top 53 bits, centred in their cell: never 0 or 1
            out = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        self.cursor += n
        return out

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard-normal draws; advances the cursor."""
        if n == 0:
            return np.empty(0)
        return inv_normal_cdf(self.uniforms(n))


def gaussian_stream(driver: GaussianDriver, n: int) -> np.ndarray:
    return driver.normals(n)


@dataclass(frozen=True)
class FourierTruncation:
    n_terms: int = DEFAULT_TRUNCATION

    def __post_init__(self) -> None:
        if int(self.n_terms) < 1:
            raise ValueError(f"n_terms must be >= 1, got {self.n_terms}")


@dataclass(frozen=True)
class TrajectoryGrid:
    times: tuple[float, ...]

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ValueError("grid must contain at least one time")
        if not all(math.isfinite(t) for t in times) or times[0] < 0:
            raise ValueError("grid times must be finite and >= 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)


def _as_truncation(trunc) -> int:
    if isinstance(trunc, FourierTruncation):
        return int(trunc.n_terms)
    return int(FourierTruncation(int(trunc)).n_terms)


def _fourier_basis(t: float, n_terms: int) -> np.ndarray:
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    basis = np.empty(n_terms + 1)
    basis[0] = t
    basis[1:] = math.sqrt(2.0) * np.sin(math.pi * n * t) / (math.pi * n)
    return basis


def wiener_fourier(t: float, xi, n_terms: int | None = None):
    """Truncated random Fourier series of Brownian motion on [0, 1].

    ``W_t = xi_0 t + sqrt(2) sum_{n=1}^{N} xi_n sin(pi n t) / (pi n)``.

    ``xi`` holds ``N + 1`` coefficients (``xi_0`` first); a 2-D array gives one
    path per row and returns an array.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    xi = np.asarray(xi, dtype=float)
    length = xi.shape[-1]
    if n_terms is not None and length != n_terms + 1:
        raise ValueError(f"expected {n_terms + 1} coefficients, got {length}")
    if length < 2:
        raise ValueError("need xi_0 and at least one sine coefficient")
    basis = _fourier_basis(t, length - 1)
    # elementwise product + numpy pairwise sum: same bits regardless of BLAS threading
    return (xi * basis).sum(axis=-1) if xi.ndim > 1 else float((xi * basis).sum())


def wiener_scaled(t: float, c: float, driver: GaussianDriver, trunc=DEFAULT_TRUNCATION) -> float:
    """Brownian motion on [0, c] as ``sqrt(c) W(t / c)``; consumes ``N + 1`` draws."""
    if not c > 0:
        raise ValueError(f"horizon c must be > 0, got {c!r}")
    if not 0.0 <= t <= c:
        raise ValueError(f"t must lie in [0, c], got t={t!r}, c={c!r}")
    n_terms = _as_truncation(trunc)
    xi = driver.normals(n_terms + 1)
    return math.sqrt(c) * wiener_fourier(min(t / c, 1.0), xi)


def _fourier_noise_coeffs(p: OuParams, t: float, n_terms: int, horizon: float | None):
    """Basis that turns ``N + 1`` draws into ``x_t - m_t`` for the Fourier sampler."""
    c = math.expm1(2.0 * p.theta * t)
    if horizon is None:
        horizon = max(1.0, c)
    if c > horizon:
        raise ValueError(f"horizon {horizon!r} shorter than time-changed clock {c!r}")
    scale = p.sigma / math.sqrt(2.0 * p.theta) * math.exp(-p.theta * t)
    return scale * math.sqrt(horizon) * _fourier_basis(min(c / horizon, 1.0), n_terms)


def ou_observe(p: OuParams, t: float, driver, trunc=DEFAULT_TRUNCATION, horizon: float | None = None) -> float:
    """One observation of ``x_t`` from the time-changed Fourier representation.

    ``x_t = m_t + sigma / sqrt(2 theta) e^{-theta t} W(e^{2 theta t} - 1)`` with
    ``W`` the truncated Fourier series. When the clock ``c = e^{2 theta t} - 1``
    is at most 1 the series is evaluated at ``c`` directly; otherwise it is
    rescaled to the horizon ``c`` (override with ``horizon``). Consumes
    ``N + 1`` draws, ``xi_0`` first.
    """
    if not t > 0:
        raise ValueError(f"observation time must be > 0, got {t!r}")
    n_terms = _as_truncation(trunc)
    coeffs = _fourier_noise_coeffs(p, t, n_terms, horizon)
    xi = np.asarray(driver.normals(n_terms + 1), dtype=float)
    return transition_mean(p, t) + float((xi * coeffs).sum())


def sample_observations(
    p: OuParams,
    t: float,
    n: int,
    driver: GaussianDriver,
    sampler: str = "exact",
    trunc=DEFAULT_TRUNCATION,
    horizon: float | None = None,
) -> np.ndarray:
    """``n`` independent cross-sectional observations of ``x_t``.

    ``sampler="exact"`` maps one draw per observation through the transition
    law. ``sampler="fourier"`` uses :func:`ou_observe`; PRNG drivers feed it
    consecutive blocks of ``N + 1`` draws, Weyl drivers give observation ``i``
    its own stream ``key + i``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not t > 0:
        raise ValueError(f"observation time must be > 0, got {t!r}")
    if sampler == "exact":
        return transition_law(p, t).sample(driver.normals(n))
    if sampler != "fourier":
        raise ValueError(f"unknown sampler {sampler!r}")

    n_terms = _as_truncation(trunc)
    coeffs = _fourier_noise_coeffs(p, t, n_terms, horizon)
    mean = transition_mean(p, t)
    out = np.empty(n)
    chunk = max(1, 2**22 // (n_terms + 1))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        if getattr(driver, "kind", None) == "weyl":
            xi = np.stack([driver.spawn(i).normals(n_terms + 1) for i in range(lo, hi)])
        else:
            xi = driver.normals((hi - lo) * (n_terms + 1)).reshape(hi - lo, n_terms + 1)
        out[lo:hi] = mean + (xi * coeffs).sum(axis=1)
    return out


def simulate_paths(p: OuParams, grid: TrajectoryGrid, n_paths: int, driver) -> np.ndarray:
    """``(n_paths, len(grid))`` array of OU paths sampled exactly on the grid.

    Paths start at ``x0`` at time 0; a grid starting after 0 gets one extra
    step from the origin. Path ``i`` consumes the ``i``-th block of draws.
    """
    if isinstance(grid, TrajectoryGrid):
        times = grid.times
    else:
        times = TrajectoryGrid(tuple(grid)).times
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    knots = times if times[0] == 0.0 else (0.0,) + times
    steps = len(knots) - 1
    xi = driver.normals(n_paths * steps).reshape(n_paths, steps)
    x = np.full((n_paths, len(knots)), p.x0)
    for j in range(steps):
        x[:, j + 1] = exact_step(p, x[:, j], knots[j + 1] - knots[j], xi[:, j])
    return x if times[0] == 0.0 else x[:, 1:]


def ou_trajectory(p: OuParams, grid: TrajectoryGrid, driver) -> list[tuple[float, float]]:
    """One path as ``(t, x)`` pairs."""
    times = grid.times if isinstance(grid, TrajectoryGrid) else TrajectoryGrid(tuple(grid)).times
    path = simulate_paths(p, times, 1, driver)[0]
    return [(t, float(x)) for t, x in zip(times, path)]
