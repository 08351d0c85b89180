"""Deterministic and stochastic propagation of the dephasing master equation."""

from .deterministic import (
    CoeffTrajectory,
    MomentTrajectory,
    integrate_consistency,
    integrate_covariance_oracle,
    rk4,
)
from .stochastic import (
    EnsembleStats,
    PureGaussianTrajectoryState,
    Trajectory,
    ensemble_average,
    simulate_measurement_trajectory,
    simulate_noise_trajectory,
)

__all__ = [
    "CoeffTrajectory",
    "EnsembleStats",
    "MomentTrajectory",
    "PureGaussianTrajectoryState",
    "Trajectory",
    "ensemble_average",
    "integrate_consistency",
    "integrate_covariance_oracle",
    "rk4",
    "simulate_measurement_trajectory",
    "simulate_noise_trajectory",
]
