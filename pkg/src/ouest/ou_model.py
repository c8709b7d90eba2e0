"""Closed-form transition law of the Ornstein-Uhlenbeck process.

The process solves ``dx_t = theta (mu - x_t) dt + sigma dW_t`` with ``x_0`` fixed,
so ``x_t`` is Gaussian with

    m_t       = x0 e^{-theta t} + mu (1 - e^{-theta t})
    sigma_t^2 = sigma^2 / (2 theta) (1 - e^{-2 theta t})

and ``cov(x_s, x_t) = sigma^2 / (2 theta) (e^{-theta |t-s|} - e^{-theta (t+s)})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_time(t: float, name: str = "t") -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {t!r}")
    return t


@dataclass(frozen=True)
class OuParams:
    """Model quadruple ``(theta, mu, sigma, x0)``.

    ``theta`` and ``sigma`` must be strictly positive; every field finite.
    """

    theta: float
    mu: float
    sigma: float
    x0: float

    def __post_init__(self) -> None:
        for name in ("theta", "mu", "sigma", "x0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.theta <= 0:
            raise ValueError(f"theta must be > 0, got {self.theta!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")

    @property
    def stationary_variance(self) -> float:
        return self.sigma**2 / (2.0 * self.theta)


@dataclass(frozen=True)
class GaussianLaw:
    """One-dimensional normal law."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.variance >= 0:
            raise ValueError(f"variance must be >= 0, got {self.variance!r}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def cdf(self, x):
        """Distribution function; a point mass when the variance is zero."""
        from scipy.special import ndtr

        x = np.asarray(x, dtype=float)
        if self.variance == 0:
            return (x >= self.mean).astype(float)
        return ndtr((x - self.mean) / self.std)

    def sample(self, xi):
        """Map standard-normal draws onto this law."""
        return self.mean + self.std * np.asarray(xi, dtype=float)


def transition_mean(p: OuParams, t: float) -> float:
    t = _check_time(t)
    decay = math.exp(-p.theta * t)
    return p.x0 * decay + p.mu * -math.expm1(-p.theta * t)


def transition_variance(p: OuParams, t: float) -> float:
    t = _check_time(t)
    return p.stationary_variance * -math.expm1(-2.0 * p.theta * t)


def covariance(p: OuParams, s: float, t: float) -> float:
    """Covariance of ``x_s`` and ``x_t``; symmetric in its time arguments."""
    s = _check_time(s, "s")
    t = _check_time(t)
    lo, hi = min(s, t), max(s, t)
    # e^{-theta(hi-lo)} - e^{-theta(hi+lo)} = e^{-theta(hi-lo)} (1 - e^{-2 theta lo})
    return (
        p.stationary_variance
        * math.exp(-p.theta * (hi - lo))
        * -math.expm1(-2.0 * p.theta * lo)
    )


def transition_law(p: OuParams, t: float) -> GaussianLaw:
    """Gaussian law of ``x_t`` given ``x_0 = p.x0``.

    ``t = 0`` gives the degenerate law ``(x0, 0)``; sampling it returns ``x0``.
    """
    return GaussianLaw(transition_mean(p, t), transition_variance(p, t))


def exact_step(p: OuParams, x, dt: float, xi):
    """Advance the process by ``dt`` from state ``x`` using standard-normal ``xi``.

    Exact in distribution for any ``dt > 0``. ``x`` and ``xi`` broadcast, so a
    whole ensemble of paths can be stepped at once.

    Parameters
    ----------
    p : OuParams
    x : float or ndarray
        Current state(s).
    dt : float
        Step length, strictly positive.
    xi : float or ndarray
        Standard-normal innovations.

    Returns
    -------
    float or ndarray
        State(s) at time ``+dt``.
    """
    dt = float(dt)
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    decay = math.exp(-p.theta * dt)
    sd = math.sqrt(p.stationary_variance * -math.expm1(-2.0 * p.theta * dt))
    out = np.asarray(x, dtype=float) * decay + p.mu * -math.expm1(-p.theta * dt)
    out = out + sd * np.asarray(xi, dtype=float)
    if out.ndim == 0:
        return float(out)
    return out
