"""Ornstein-Uhlenbeck simulation and cross-sectional parameter estimation."""

__version__ = "0.1.0"

from .ou_model import (  # noqa: E402
    GaussianLaw,
    OuParams,
    covariance,
    exact_step,
    transition_law,
    transition_mean,
    transition_variance,
)
from .gauss_sim import (  # noqa: E402
    FourierTruncation,
    GaussianDriver,
    TrajectoryGrid,
    gaussian_stream,
    inv_normal_cdf,
    ou_observe,
    ou_trajectory,
    sample_observations,
    simulate_paths,
    weyl_uniform,
    wiener_fourier,
    wiener_scaled,
)
from .estimators import (  # noqa: E402
    EstimateTrace,
    EstimationError,
    KnownContext,
    ObservationSample,
    ThetaRatioError,
    equidistribution_counts,
    estimate_mu,
    estimate_sigma_sq,
    estimate_theta,
    estimate_x0,
    running_trace,
)
