import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from reachlab.errors import BlowUpError
from reachlab.integrate import flow_endpoint, integrate_trajectory, richardson_error, time_grid
from reachlab.system import ControlAffineSystem, PiecewiseConstantControl, rhs

from oracles import ode_endpoint

GROWTH = ControlAffineSystem.from_strings(["x0"], [["0"]])
LINEAR = ControlAffineSystem.from_strings(["x1", "-x0 - 0.5*x1"], [["1", "0"], ["0", "1"]])
VDP = ControlAffineSystem.from_strings(["x1", "(1 - x0^2)*x1 - x0"], [["0", "1"]])
A = np.array([[0.0, 1.0], [-1.0, -0.5]])


def zero(m=1, horizon=1.0):
    return PiecewiseConstantControl.constant(np.zeros(m), horizon)


@given(
    st.floats(0.05, 3.0),
    st.floats(0.001, 0.2),
    st.lists(st.floats(0.0, 3.0), max_size=4),
)
@settings(max_examples=200)
def test_time_grid_shape(horizon, step, breaks):
    grid = time_grid(horizon, step, breaks)
    assert grid[0] == 0.0 and grid[-1] == horizon
    gaps = np.diff(grid)
    assert np.all(gaps > 1e-9 * step * 0.99)
    assert np.all(gaps <= step * (1 + 1e-9))
    for b in breaks:
        if 0 < b < horizon:
            assert np.min(np.abs(grid - b)) <= 1e-9 * step


def test_rk4_order_on_growth():
    errs = [abs(flow_endpoint(GROWTH, [1.0], zero(), 1.0, h)[0] - math.e) for h in (0.1, 0.05, 0.025)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 1 / 32 <= fine / coarse <= 1 / 8


def test_linear_system_matches_matrix_exponential():
    u = np.array([0.3, -0.7])
    x0 = np.array([1.0, -0.5])
    t = 1.5
    eAt = expm(A * t)
    want = eAt @ x0 + np.linalg.solve(A, (eAt - np.eye(2)) @ u)
    got = flow_endpoint(LINEAR, x0, PiecewiseConstantControl.constant(u, t), t, 0.01)
    assert np.allclose(got, want, atol=1e-9)


def test_switching_control_matches_adaptive_solver():
    u = PiecewiseConstantControl.uniform(np.array([[1.0], [-1.0], [0.5]]), 1.2)
    got = flow_endpoint(VDP, [1.0, 0.0], u, 1.2, 0.005)
    x = np.array([1.0, 0.0])
    for k in range(3):
        x = ode_endpoint(lambda y, v=u.values[k]: rhs(VDP, y, v), x, 0.4)
    assert np.allclose(got, x, atol=1e-8)


@given(st.integers(1, 20), st.integers(1, 20))
@settings(max_examples=50, deadline=None)
def test_cocycle(i, j):
    h = 0.01
    s, t = i * 0.05, j * 0.05
    u = PiecewiseConstantControl.constant([0.4], s + t)
    whole = flow_endpoint(VDP, [0.5, -0.2], u, s + t, h)
    half = flow_endpoint(VDP, [0.5, -0.2], u, s, h)
    rest = flow_endpoint(VDP, half, PiecewiseConstantControl.constant([0.4], t), t, h)
    assert np.allclose(whole, rest, atol=1e-10)


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=50, deadline=None)
def test_linear_in_control_from_rest(c, a, b):
    u = PiecewiseConstantControl.uniform(np.array([[a, b], [b, -a]]), 1.0)
    cu = PiecewiseConstantControl.uniform(c * u.values, 1.0)
    base = flow_endpoint(LINEAR, [0.0, 0.0], u, 1.0, 0.01)
    scaled = flow_endpoint(LINEAR, [0.0, 0.0], cu, 1.0, 0.01)
    assert np.allclose(scaled, c * base, atol=1e-12)


def test_trajectory_records_grid():
    u = PiecewiseConstantControl.uniform(np.array([[1.0], [-1.0]]), 1.0)
    traj = integrate_trajectory(VDP, [1.0, 0.0], u, 1.0, 0.03)
    assert traj.times[0] == 0.0 and traj.times[-1] == 1.0
    assert 0.5 in traj.times
    assert np.array_equal(traj.states[0], [1.0, 0.0])
    assert traj.states.shape == (traj.times.size, 2)


def test_blow_up_names_time():
    sq = ControlAffineSystem.from_strings(["x0^2"], [["0"]])
    with pytest.raises(BlowUpError) as info:
        integrate_trajectory(sq, [1.0], zero(horizon=2.0), 2.0, 0.01)
    assert 0.9 < info.value.time <= 1.2
    assert info.value.control is not None


def test_zero_time_and_short_horizon():
    assert np.array_equal(flow_endpoint(VDP, [1.0, 2.0], zero(), 0.0, 0.01), [1.0, 2.0])
    assert np.all(np.isfinite(flow_endpoint(VDP, [1.0, 2.0], zero(), 0.001, 0.01)))
    with pytest.raises(ValueError):
        integrate_trajectory(VDP, [1.0, 2.0], zero(), 0.001, 0.01)


def test_richardson_estimate_tracks_true_error():
    est = richardson_error(GROWTH, [1.0], [zero()], 1.0, 0.1)
    true = abs(flow_endpoint(GROWTH, [1.0], zero(), 1.0, 0.1)[0] - math.e)
    assert 0.5 * true <= est <= 2 * true
