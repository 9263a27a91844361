import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachlab.expr import parse_expression
from reachlab.lab import (
    extremize_functional,
    inward,
    joint_sweep,
    outward,
    parse_rows_csv,
    probe_points,
    slack_terms,
    sweep_omega,
    sweep_state,
    sweep_time,
    verdict_from_csv,
)
from reachlab.metric import PointCloud
from reachlab.omega import Ball, Box, Hull, omega_contains, omega_hausdorff, omega_net
from reachlab.reach import ReachSpec, reachable_cloud
from reachlab.system import ControlAffineSystem

INTEGRATOR = ControlAffineSystem.from_strings(["0"], [["1"]])
LINEAR = ControlAffineSystem.from_strings(["x1", "-x0 - 0.5*x1"], [["1", "0"], ["0", "1"]])
UNIT = Box([-1.0], [1.0])
SPEC = ReachSpec(2, 4, 0.01, 0.005)
SMALL = ReachSpec(2, 2, 0.02, 0.01)


@pytest.mark.parametrize(
    "omega",
    [Box([-1.0], [1.0]), Box([-1.0, 0.0], [1.0, 2.0]), Ball([0.0, 1.0], 0.5), Hull([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])],
)
@pytest.mark.parametrize("delta", [0.0, 0.05, 0.3])
def test_perturbations_stay_within_delta(omega, delta):
    for pert in (outward(omega, delta), inward(omega, delta)):
        assert omega_hausdorff(omega, pert) <= delta + 1e-12
    assert all(omega_contains(outward(omega, delta), p, 1e-12) for p in omega_net(omega, 3))


def test_omega_sweep_on_integrator_follows_delta():
    rep = sweep_omega(INTEGRATOR, [0.0], 1.0, UNIT, [0.4, 0.2, 0.1, 0.05], SPEC)
    assert [r.delta for r in rep.rows] == [0.05, 0.1, 0.2, 0.4]
    for r in rep.rows:
        assert abs(r.rho_h - r.delta) <= 0.02
    assert rep.verdict["passed"] and rep.verdict["strictly_decreasing"]
    assert verdict_from_csv("omega", rep.rows_csv()) == rep.verdict


def test_state_sweep_is_translation():
    rep = sweep_state(INTEGRATOR, 1.0, UNIT, [0.0], [0.5, 0.25, 0.125], SPEC, probes=4)
    assert [r.rho_h for r in rep.rows] == [0.125, 0.25, 0.5]
    assert verdict_from_csv("state", rep.rows_csv()) == rep.verdict


def test_time_sweep_columns_and_zero_row():
    rep = sweep_time(LINEAR, [0.0, 0.0], 1.0, [0.0, 0.1], Box([-1.0, -1.0], [1.0, 1.0]), SMALL)
    assert rep.columns == ("delta", "rho_h", "dir_ab", "dir_ba", "slack", "speed_bound", "nest")
    assert rep.rows[0].rho_h == 0.0
    rows = parse_rows_csv(rep.rows_csv())
    assert rows[1]["nest"] <= SMALL.r
    assert verdict_from_csv("time", rep.rows_csv(), SMALL.r) == rep.verdict


def test_joint_sweep_is_seeded():
    omega = Box([-1.0, -1.0], [1.0, 1.0])
    a = joint_sweep(LINEAR, [0.0, 0.0], 1.0, omega, [0.1, 0.05], SMALL, seed=3)
    b = joint_sweep(LINEAR, [0.0, 0.0], 1.0, omega, [0.1, 0.05], SMALL, seed=3)
    assert a.rows_csv() == b.rows_csv()
    assert a.verdict["triangle_violations"] == 0


def test_slack_terms_are_itemized():
    cloud = reachable_cloud(INTEGRATOR, [0.0], 1.0, UNIT, SPEC)
    terms = slack_terms(INTEGRATOR, 1.0, [UNIT], SPEC, [cloud], 0.0)
    assert set(terms) == {"dedup", "integration", "net", "total"}
    assert terms["total"] == terms["dedup"] + terms["integration"] + terms["net"]
    assert terms["dedup"] == SPEC.r


@given(st.integers(1, 6), st.floats(0.01, 2.0), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_probe_points_at_exact_distance(probes, delta, dim):
    x0 = np.arange(dim, dtype=float)
    P = probe_points(x0, delta, probes)
    assert P.shape[1] == dim and 1 <= P.shape[0] <= max(probes, 2)
    assert np.allclose(np.linalg.norm(P - x0, axis=1), delta)


@given(
    st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=1, max_size=40),
    st.sampled_from(["x0^2 + x1^2", "x0 - x1", "abs(x0)*x1", "sin(x0) + 0*x1"]),
)
@settings(max_examples=100, deadline=None)
def test_extremes_match_brute_force(pts, src):
    P = np.array(pts, dtype=float) * 0.25
    cloud = PointCloud(np.unique(P, axis=0))
    J = parse_expression(src, ["x0", "x1"])
    ext = extremize_functional(J, cloud)
    x, y = cloud.points[:, 0], cloud.points[:, 1]
    values = {
        "x0^2 + x1^2": x**2 + y**2,
        "x0 - x1": x - y,
        "abs(x0)*x1": np.abs(x) * y,
        "sin(x0) + 0*x1": np.sin(x) + 0 * y,
    }[src]
    assert ext.max_value == values.max() and ext.min_value == values.min()
    # ties resolve to the lexicographically smallest point; cloud points are already sorted
    assert np.array_equal(ext.argmax, cloud.points[int(np.argmax(values))])
    assert np.array_equal(ext.argmin, cloud.points[int(np.argmin(values))])


def test_integrator_extremes():
    ext = extremize_functional(parse_expression("x0", ["x0"]), reachable_cloud(INTEGRATOR, [0.0], 1.0, UNIT, SPEC))
    assert ext.max_value == pytest.approx(1.0, abs=0.02)
    assert ext.min_value == pytest.approx(-1.0, abs=0.02)
