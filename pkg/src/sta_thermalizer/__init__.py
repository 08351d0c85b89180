"""Shortcuts to thermalization for a harmonic oscillator with dephasing.

Exact control schedules (trap frequency and dephasing strength) that carry a
thermal Gaussian state to another thermal state in finite time, together with
deterministic and stochastic propagators and spectral diagnostics used to
verify them.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateSpectrumError,
    DomainError,
    IntegrationError,
    NumericalError,
    PreconditionError,
    SingularDenominatorError,
    StaError,
    TruncationError,
)
from .gaussian_core import (
    GaussianCoeffs,
    Moments,
    SpectralData,
    ThermalEndpoint,
    coeffs_from_moments,
    coeffs_from_spectral,
    covariance_moments,
    mean_phonon,
    purity,
    spectral_decompose,
    thermal_coeffs,
    von_neumann_entropy,
)
from .protocol import (
    ControlSchedule,
    ProtocolSpec,
    control_dephasing,
    control_frequency,
    effective_Omega,
    gamma_max,
    interpolate_coeffs,
    scaling_eta,
    smoothstep5,
    synthesize_schedule,
)

__all__ = [
    "ControlSchedule",
    "DegenerateSpectrumError",
    "DomainError",
    "GaussianCoeffs",
    "IntegrationError",
    "Moments",
    "NumericalError",
    "PreconditionError",
    "ProtocolSpec",
    "SingularDenominatorError",
    "SpectralData",
    "StaError",
    "ThermalEndpoint",
    "TruncationError",
    "coeffs_from_moments",
    "coeffs_from_spectral",
    "control_dephasing",
    "control_frequency",
    "covariance_moments",
    "effective_Omega",
    "gamma_max",
    "interpolate_coeffs",
    "mean_phonon",
    "purity",
    "scaling_eta",
    "smoothstep5",
    "spectral_decompose",
    "synthesize_schedule",
    "thermal_coeffs",
    "von_neumann_entropy",
]
