import math

import numpy as np
import pytest

from sta_thermalizer import DomainError, SpectralData, coeffs_from_spectral
from sta_thermalizer.oracles import (
    coherent_state_center,
    overlap_integral_quadrature,
    relative_entropy_grid,
    rotated_thermal_coeffs,
)


def test_rotated_thermal_matches_spectral_form():
    c = rotated_thermal_coeffs(0.3, 0.4, 1.2)
    ref = coeffs_from_spectral(SpectralData.from_weight(1.2, 0.3, B=0.4))
    assert (c.A, c.B, c.C) == pytest.approx((ref.A, ref.B, ref.C), rel=1e-15)


def test_grid_relative_entropy_vanishes_without_rotation():
    assert abs(relative_entropy_grid(0.3, 0.0, 1.0)) < 1e-9


def test_grid_too_large():
    with pytest.raises(DomainError):
        relative_entropy_grid(0.3, 50.0, 1.0, max_points=500)


def test_quadrature_gaussian_integral():
    assert overlap_integral_quadrature(0, 0, 2.0 + 0j) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)


def test_coherent_center():
    x, p = coherent_state_center(2.0, 1.0, 0.0, np.array([0.0, math.pi / 4]))
    assert x == pytest.approx([1.0, 0.0], abs=1e-15)
    assert p == pytest.approx([0.0, -2.0], abs=1e-15)
