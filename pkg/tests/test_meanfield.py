import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsma.errors import ConfigError, DivergenceError
from ucsma.meanfield import (OdeParams, compare_convergence, in_well_defined_region,
                             integrate, integrate_x, integrate_y, quasi_steady_state, rhs_x,
                             rhs_y, y1_closed_form)


def test_rhs_x_examples():
    p = OdeParams(z=2.0)
    assert rhs_x([0.5, 0, 0, 0], p) == pytest.approx([-0.5, 0, 0, 0.5])
    assert rhs_x([0.4, 0.1, 0.1, 0.1], p) == pytest.approx([0.6, -0.599, 0.2, 0.199])
    assert rhs_x([0, 0, 0, 0], OdeParams(z=2.0, c_R=3.0)) == pytest.approx([0, 0.375, 0, -0.375])


def test_rhs_y_examples():
    p = OdeParams(z=2.0)
    assert rhs_y([0.5, 0, 0, 0], p) == pytest.approx([0, 0, 0, 0.5])
    assert rhs_y([0.5, 0.2, 0.1, 0.3], p)[0] == 0.0
    assert rhs_y([0.4, 0.1, 0.1, 0.1], p)[0] == pytest.approx(2 / 3 * 0.001)


def test_rk4_on_decay():
    tr = integrate(lambda y: -y, [1.0], 0.0, 1.0, 1e-3, sample_times=[1.0])
    assert tr.y[-1, 0] == pytest.approx(math.exp(-1), abs=1e-10)


def test_zero_rhs_is_constant():
    tr = integrate(lambda y: np.zeros_like(y), [0.2, 0.1], 0.0, 5.0, 0.1)
    assert np.all(tr.y == np.array([0.2, 0.1]))


def test_closed_form_values():
    assert y1_closed_form(0.1, 1.0, 2.0, 2.0) == pytest.approx(0.1)
    # alpha = 0.4, beta = (4/3) 0.16
    assert y1_closed_form(0.1, 1.0, 0.0, 3.0) == pytest.approx(0.5 - 0.4 / math.sqrt(1.64),
                                                               abs=1e-12)
    assert y1_closed_form(0.1, 1.0, 0.0, 3.0) == pytest.approx(0.18764, abs=2e-5)
    assert y1_closed_form(0.1, 1.0, 0.0, 1e12) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(ConfigError):
        y1_closed_form(0.6, 1.0, 0.0, 1.0)


def test_scalar_ode_matches_closed_form_random_starts():
    rng = np.random.default_rng(0)
    for _ in range(10):
        y1 = rng.uniform(0.05, 0.45)
        z = rng.choice([20.0, 50.0, 100.0])
        p = OdeParams(z=z, tau=100.0)
        ts = np.linspace(0, 100, 101)
        tr = integrate_y(quasi_steady_state(y1, z), p, ts)
        err = np.max(np.abs(tr.y[:, 0] - y1_closed_form(y1, 1.0, 0.0, ts)))
        assert err <= 1e-8
        assert np.all(np.diff(tr.y[:, 0]) > 0)


@pytest.mark.parametrize("z", [20.0, 50.0, 100.0])
@pytest.mark.parametrize("x1", [0.1, 0.2, 0.3, 0.45])
def test_well_defined_region_is_invariant(z, x1):
    p = OdeParams(z=z, tau=20.0)
    x0 = quasi_steady_state(x1, z)
    assert in_well_defined_region(integrate_x(x0, p))
    assert in_well_defined_region(integrate_y(x0, p))


def test_rhs_consistent_with_trajectory():
    p = OdeParams(z=20.0, tau=1.0)
    h = p.step
    tr = integrate_x(quasi_steady_state(0.2, 20.0), p, np.array([0.0, h]))
    fd = (tr.y[1] - tr.y[0]) / h
    assert fd == pytest.approx(rhs_x(tr.y[0], p), abs=50 * h)


def test_divergence_is_reported():
    with pytest.raises(DivergenceError):
        integrate(lambda y: y * 10, [1.0], 0.0, 10.0, 0.01)


def test_fit_recovers_synthetic_law():
    t = np.linspace(1, 200, 200)
    fit = compare_convergence(t, delta=0.1 * (1 + 0.4 * t) ** -0.5)
    assert fit.a == pytest.approx(0.1, abs=1e-6)
    assert fit.b == pytest.approx(0.4, abs=1e-6)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_on_zero_gap():
    t = np.arange(1, 21, dtype=float)
    assert compare_convergence(t, theta=np.full(20, 0.5)).C1 == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(0.05, 2.0))
def test_c1_bounds_the_gap(a, b):
    t = np.linspace(1, 100, 50)
    d = a * (1 + b * t) ** -0.5
    fit = compare_convergence(t, delta=d)
    assert np.all(d <= fit.C1 / np.sqrt(t) + 1e-12)


def test_trajectory_csv(tmp_path):
    tr = integrate_x(quasi_steady_state(0.2, 20.0), OdeParams(z=20.0, tau=1.0))
    tr.to_csv(tmp_path / "x.csv")
    head = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert head == "t,x1,x2,x3,x4"
