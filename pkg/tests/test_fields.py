import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclav.cantor import FractalConfig
from fraclav.errors import SingularPointError
from fraclav.fields import (
    building_block,
    cutoff_eta,
    falling,
    fractal_fields,
    localized_fields,
    ramp,
    ramp_prime,
    sphere_normalization,
)

CONFIGS = [("matching", 2, None), ("sub", 2, 1.5), ("super", 2, 3.0),
           ("matching", 3, None), ("sub", 3, 2.5), ("super", 3, 4.0)]


def _cfg(regime, d, p0):
    return FractalConfig.build(regime, d, p0)


def _points(cfg, n, seed=0):
    x = np.random.default_rng(seed).uniform(-1, 1, (4 * n, cfg.d))
    return x[cfg.distance_to_contact(x) > 0.05][:n]


def test_ramp_endpoints_and_monotone():
    s = np.linspace(-0.5, 1.5, 2001)
    r = ramp(s)
    assert r[0] == 0.0 and r[-1] == 1.0
    assert np.all(np.diff(r) >= 0)
    assert ramp(0.5) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99))
def test_ramp_derivative(s):
    h = 1e-6
    fd = (ramp(s + h) - ramp(s - h)) / (2 * h)
    assert ramp_prime(s) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_falling_limits():
    v, _ = falling(np.array([0.1, 0.5, 2.0, 5.0]), 0.5, 2.0)
    assert np.allclose(v, [1, 1, 0, 0])


def test_sphere_normalization():
    assert sphere_normalization(2) == pytest.approx(4.0)
    assert sphere_normalization(3) == pytest.approx(4 * np.pi)


def test_building_block_undefined_at_origin():
    with pytest.raises(SingularPointError):
        building_block(np.zeros((1, 2)))


@pytest.mark.parametrize("regime,d,p0", CONFIGS)
def test_disjoint_supports_and_bounds(regime, d, p0):
    cfg = _cfg(regime, d, p0)
    x = np.random.default_rng(5).uniform(-1, 1, (5000, d))
    s = fractal_fields(x, cfg, want=("u", "grad_u", "b"))
    prod = np.linalg.norm(s.grad_u, axis=1) * np.linalg.norm(s.b, axis=1)
    assert prod.max() < 1e-14
    assert np.abs(s.u).max() <= 1.0 + 1e-14


@pytest.mark.parametrize("regime,d,p0", CONFIGS)
def test_A_skew(regime, d, p0):
    cfg = _cfg(regime, d, p0)
    A = fractal_fields(_points(cfg, 300), cfg, want=("A",)).A
    assert np.max(np.abs(A + np.swapaxes(A, 1, 2))) == 0.0


@pytest.mark.parametrize("regime,d,p0", CONFIGS[:3])
def test_gradient_matches_finite_differences(regime, d, p0):
    cfg = _cfg(regime, d, p0)
    x = _points(cfg, 50, seed=2)
    h = 1e-6
    g = fractal_fields(x, cfg, want=("grad_u",)).grad_u
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        fd = (fractal_fields(x + e, cfg, want=("u",)).u - fractal_fields(x - e, cfg, want=("u",)).u) / (2 * h)
        assert np.max(np.abs(fd - g[:, a])) < 1e-5 * (1 + np.abs(g).max())


@pytest.mark.parametrize("regime,d,p0", CONFIGS[:3])
def test_localized_split_sums(regime, d, p0):
    cfg = _cfg(regime, d, p0)
    x = _points(cfg, 400, seed=4)
    s = localized_fields(x, cfg)
    assert np.allclose(s.u_in + s.u_bd, s.u)
    assert np.allclose(s.grad_u_in + s.grad_u_bd, s.grad_u)
    assert np.allclose(s.b_in + s.b_bd, s.b)


def test_cutoff_support():
    x = np.array([[0.0, 0.0], [0.6, -0.6], [0.9, 0.0], [0.0, -0.95]])
    eta, g = cutoff_eta(x)
    assert np.allclose(eta, [1, 1, 0, 0])
    assert np.allclose(g, 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_symmetry_in_horizontal_variable(a, z):
    cfg = FractalConfig.build("super", 2, 3.0)
    if cfg.distance_to_contact(np.array([[a, z]]))[0] < 1e-3:
        return
    s1 = fractal_fields(np.array([[a, z]]), cfg, want=("u",)).u
    s2 = fractal_fields(np.array([[-a, z]]), cfg, want=("u",)).u
    assert s1[0] == pytest.approx(s2[0], abs=1e-12)
