import math

import numpy as np
import pytest

from fraclav.cantor import FractalConfig
from fraclav.integrate import (
    QuadPolicy,
    adaptive_box,
    all_faces,
    integrate_surface,
    integrate_volume,
)


def test_polynomial_exact():
    res = adaptive_box(lambda x: x[:, 0] ** 4 * x[:, 1] ** 2, 2)
    assert res.value == pytest.approx(4.0 / 15.0, rel=1e-12)


def test_volume_and_components():
    res = adaptive_box(lambda x: np.stack([np.ones(len(x)), x[:, 0] ** 2], axis=1), 3)
    assert np.allclose(res.value, [8.0, 8.0 / 3.0])


def test_surface_faces():
    total = sum(integrate_surface(lambda x: np.ones(len(x)), 3, f).value for f in all_faces(3))
    assert total == pytest.approx(24.0)


def test_inverse_radius_with_tube_bound():
    # int over (-1,1)^2 of 1/|x| = 8 asinh(1)
    exact = 8.0 * math.asinh(1.0)
    cfg = FractalConfig.build("matching", 2)
    res = integrate_volume(lambda x: 1.0 / np.linalg.norm(x, axis=1), cfg, QuadPolicy(max_depth=16),
                           tail_exponent=1.0)
    assert res.value < exact
    assert abs(res.value + res.excluded_mass_bound - exact) <= res.excluded_mass_bound + 10 * res.error_estimate
    assert abs(res.extrapolated - exact) < 1e-3 * exact


def test_no_tube_without_refinement():
    cfg = FractalConfig.build("matching", 2)
    res = integrate_volume(lambda x: x[:, 0] ** 2, cfg, QuadPolicy(refine_near_S=False))
    assert res.excluded_mass_bound == 0.0
    assert res.value == pytest.approx(4.0 / 3.0)


def test_budget_flags_partial():
    res = adaptive_box(lambda x: np.abs(x[:, 0] - 0.1234) ** 0.5, 2, policy=QuadPolicy(budget=500, rtol=1e-12))
    assert res.partial
