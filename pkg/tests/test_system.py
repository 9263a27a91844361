import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachlab.errors import DimensionError, ExprError
from reachlab.omega import Box
from reachlab.system import ControlAffineSystem, PiecewiseConstantControl, control_value, rhs, square_wave

VDP = ControlAffineSystem.from_strings(["x1", "(1 - x0^2)*x1 - x0"], [["0", "1"]])
MIXED = ControlAffineSystem.from_strings(["sin(x1)", "x0*x1"], [["1", "x0"], ["cos(x0)", "0"]])

coord = st.floats(-3, 3, allow_nan=False)
vec2 = st.tuples(coord, coord).map(np.array)


def test_rhs_known_value():
    assert np.allclose(rhs(VDP, [1.0, 2.0], [0.5]), [2.0, -0.5])


@given(vec2, vec2, vec2, st.floats(-2, 2))
@settings(max_examples=200)
def test_affine_in_control(x, u, v, a):
    lhs = rhs(MIXED, x, a * u + (1 - a) * v)
    combo = a * rhs(MIXED, x, u) + (1 - a) * rhs(MIXED, x, v)
    assert np.allclose(lhs, combo, rtol=1e-10, atol=1e-10)


@given(st.lists(st.tuples(vec2, vec2), min_size=1, max_size=10))
@settings(max_examples=100)
def test_batch_matches_scalar(pairs):
    X = np.array([p[0] for p in pairs])
    U = np.array([p[1] for p in pairs])
    batch = MIXED.rhs_batch(X, U)
    for i in range(len(pairs)):
        assert np.allclose(batch[i], rhs(MIXED, X[i], U[i]), rtol=1e-12, atol=1e-12)


def test_dimension_checks():
    with pytest.raises(DimensionError):
        rhs(VDP, [1.0], [0.0])
    with pytest.raises(DimensionError):
        rhs(VDP, [1.0, 0.0], [0.0, 1.0])
    with pytest.raises((DimensionError, ValueError)):
        ControlAffineSystem.from_strings(["x0", "x1"], [["1"]])


def test_unknown_variable_rejected():
    with pytest.raises(ExprError):
        ControlAffineSystem.from_strings(["x5"], [["1"]])


def test_string_round_trip():
    again = ControlAffineSystem.from_strings(VDP.to_strings()["drift"], [VDP.to_strings()["f1"]])
    assert again.to_strings() == VDP.to_strings()


def test_control_right_continuous_with_extension():
    u = PiecewiseConstantControl(np.array([0.0, 0.5, 1.0]), np.array([[1.0], [-1.0]]), np.array([0.25]))
    assert control_value(u, 0.0)[0] == 1.0
    assert control_value(u, 0.5)[0] == -1.0
    assert control_value(u, 0.4999)[0] == 1.0
    assert control_value(u, 1.0)[0] == 0.25
    assert control_value(u, -0.1)[0] == 0.25


@pytest.mark.parametrize(
    "bp, vals",
    [([0.5, 1.0], [[1.0]]), ([0.0, 1.0, 1.0], [[1.0], [2.0]]), ([0.0], []), ([0.0, 1.0], [[1.0], [2.0]])],
)
def test_control_validation(bp, vals):
    with pytest.raises(ValueError):
        PiecewiseConstantControl(np.array(bp), np.array(vals, dtype=float).reshape(-1, 1), np.zeros(1))


def test_square_wave():
    u = square_wave(4, horizon=2.0)
    assert u.pieces == 4 and u.horizon == 2.0
    assert [control_value(u, s)[0] for s in (0.1, 0.6, 1.1, 1.6, 2.0)] == [1.0, -1.0, 1.0, -1.0, 0.0]
    assert u.contained_in(Box([-1.0], [1.0]))
    assert not square_wave(2, amplitude=2.0).contained_in(Box([-1.0], [1.0]))
