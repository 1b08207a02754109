import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclav.cantor import FractalConfig
from fraclav.errors import DomainError
from fraclav.minimize import (
    GridFunction,
    SolverPolicy,
    boundary_mask,
    discrete_energy,
    minimize_w,
    write_field_csv,
    write_log_csv,
)
from fraclav.orlicz import power_model, variable_exponent_model

QUAD = power_model(2.0)


def test_constant_has_zero_energy():
    w = GridFunction.from_function(lambda x: np.full(len(x), 3.0), 17, 2)
    assert discrete_energy(QUAD, w) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_linear_energy(d):
    w = GridFunction.from_function(lambda x: x[:, 0], 9, d)
    assert discrete_energy(QUAD, w) == pytest.approx(2.0 ** (d - 1))


def test_first_order_refinement():
    f = lambda x: np.sin(x[:, 0]) * np.exp(x[:, 1])
    # exact: int (cos^2 x + sin^2 x) e^{2y} / 2 over the square
    exact = 0.5 * 2.0 * (np.exp(2) - np.exp(-2)) / 2.0
    errs = [abs(discrete_energy(QUAD, GridFunction.from_function(f, n + 1, 2)) - exact) for n in (32, 64, 128)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.8)


def test_quadratic_reproduces_linear_data():
    res = minimize_w(QUAD, 1.0, 33, data=lambda x: x[:, 0], init="zero", d=2)
    exact = GridFunction.from_function(lambda x: x[:, 0], 33, 2).values
    assert np.max(np.abs(res.w.values - exact)) < 1e-6
    assert res.converged


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_independent_of_start_and_monotone(p):
    m = power_model(p)
    f = lambda x: np.sin(2 * x[:, 0]) * x[:, 1] ** 2
    a = minimize_w(m, 1.0, 33, data=f, init="zero", d=2)
    b = minimize_w(m, 1.0, 33, data=f, init="interpolant", d=2)
    assert abs(a.energy - b.energy) <= 1e-8 * a.energy
    for r in (a, b):
        e = [row[1] for row in r.log]
        assert all(e1 <= e0 for e0, e1 in zip(e, e[1:]))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_maximum_principle(p):
    f = lambda x: np.cos(3 * x[:, 0]) + x[:, 1]
    res = minimize_w(power_model(p), 1.0, 33, data=f, init="zero", d=2)
    bd = res.w.values[res.w.boundary_mask]
    assert res.w.values.min() >= bd.min() - 1e-6
    assert res.w.values.max() <= bd.max() + 1e-6


def test_boundary_fixed_and_fractal_data():
    m = variable_exponent_model(FractalConfig.build("matching", 2), 1.9, 2.1)
    res = minimize_w(m, 2.0, 17, SolverPolicy(max_iter=50))
    start = GridFunction.from_function(lambda x: x[:, 0], 17, 2)
    mask = boundary_mask(17, 2)
    assert np.array_equal(res.w.boundary_mask, mask)
    assert np.all(np.isfinite(res.w.values))
    assert res.energy <= res.initial_energy
    assert start.values.shape == res.w.values.shape


def test_cap_flags_partial():
    f = lambda x: np.sin(2 * x[:, 0]) * x[:, 1] ** 2
    res = minimize_w(power_model(3.0), 1.0, 33, SolverPolicy(max_iter=2), data=f, init="zero", d=2)
    assert res.partial and res.grad_norm > 0


def test_input_validation():
    with pytest.raises(DomainError):
        minimize_w(QUAD, 1.0, 2, data=lambda x: x[:, 0], d=2)
    with pytest.raises(DomainError):
        minimize_w(QUAD, 1.0, 9, data=lambda x: x[:, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.99), st.sampled_from([1.3, 2.0, 3.5]))
def test_discrete_energy_convex(seed, th, p):
    rng = np.random.default_rng(seed)
    m = power_model(p)
    n = 9
    w1 = GridFunction(n, rng.normal(size=(n, n)), boundary_mask(n, 2))
    w2 = GridFunction(n, rng.normal(size=(n, n)), boundary_mask(n, 2))
    mix = GridFunction(n, th * w1.values + (1 - th) * w2.values, w1.boundary_mask)
    e = [discrete_energy(m, w) for w in (w1, w2, mix)]
    assert e[2] <= th * e[0] + (1 - th) * e[1] + 1e-12


def test_csv_outputs(tmp_path):
    res = minimize_w(QUAD, 1.0, 5, data=lambda x: x[:, 0], init="zero", d=2)
    write_field_csv(tmp_path / "f.csv", res.w)
    write_log_csv(tmp_path / "l.csv", res)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,value,boundary" and len(lines) == 26
    assert (tmp_path / "l.csv").read_text().startswith("iteration,energy,step,grad_norm")
