import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reachlab.errors import DimensionError
from reachlab.metric import (
    PointCloud,
    dedup_cloud,
    directed_hausdorff,
    directed_hausdorff_brute,
    dyadic_dictionary,
    hausdorff,
    pairing_integral,
    quantize_cloud,
    weak_star_ball,
    weak_star_discrepancy,
    within_neighborhood,
)
from reachlab.system import PiecewiseConstantControl, control_value, square_wave

from oracles import directed_hausdorff_naive


def clouds(dim, max_points=40):
    return st.integers(1, max_points).flatmap(
        lambda n: arrays(np.float64, (n, dim), elements=st.floats(-10, 10, allow_nan=False, width=32))
    )


pairs = st.integers(1, 4).flatmap(lambda d: st.tuples(clouds(d), clouds(d)))


@given(pairs)
@settings(max_examples=300, deadline=None)
def test_accelerated_equals_brute_force(pair):
    A, B = pair
    assert directed_hausdorff(A, B) == directed_hausdorff_brute(A, B)


@given(pairs)
@settings(max_examples=100, deadline=None)
def test_brute_force_matches_naive(pair):
    A, B = pair
    assert directed_hausdorff_brute(A, B) == pytest.approx(directed_hausdorff_naive(A, B), rel=1e-12, abs=1e-12)


def test_lattice_ties_are_exact():
    g = np.arange(0, 1.0001, 0.1)
    A = np.array([[x, y] for x in g for y in g])
    B = A[::3] + 1e-3
    assert directed_hausdorff(A, B) == directed_hausdorff_brute(A, B)


@given(pairs)
@settings(max_examples=100, deadline=None)
def test_symmetry_and_identity(pair):
    A, B = pair
    assert hausdorff(A, B) == hausdorff(B, A)
    assert hausdorff(A, A) == 0.0


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(clouds(d, 15), clouds(d, 15), clouds(d, 15))))
@settings(max_examples=100, deadline=None)
def test_triangle_inequality(triple):
    A, B, C = triple
    assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-9


def test_small_examples():
    A = np.array([[0.0], [1.0]])
    B = np.array([[0.0], [3.0]])
    assert directed_hausdorff(A, B) == 1.0
    assert directed_hausdorff(B, A) == 2.0
    assert hausdorff(A, B) == 2.0
    assert within_neighborhood(A, B, 1.0)
    assert not within_neighborhood(B, A, 1.999)
    assert within_neighborhood(B, A, math.inf)


def test_errors():
    with pytest.raises(DimensionError):
        hausdorff(np.zeros((2, 1)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.nan]]))


@given(clouds(3), st.sampled_from([0.5, 0.1, 0.005]))
@settings(max_examples=100, deadline=None)
def test_quantize_moves_points_by_half_cell(A, r):
    Q = quantize_cloud(A, r)
    bound = r * math.sqrt(3) / 2 * (1 + 1e-9)
    assert directed_hausdorff(A, Q) <= bound
    assert directed_hausdorff(Q, A) <= bound
    assert len(Q) == len(np.unique(Q.points, axis=0))
    assert np.array_equal(Q.points, np.unique(Q.points, axis=0))


def test_dedup_is_exact():
    A = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]])
    assert np.array_equal(dedup_cloud(A).points, [[0.0, 0.0], [1.0, 2.0]])


@given(clouds(2))
@settings(max_examples=50, deadline=None)
def test_csv_round_trip_is_exact(A):
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "c.csv"
        PointCloud(A).write_csv(path)
        assert np.array_equal(PointCloud.read_csv(path).points, A)


# -- weak* ---------------------------------------------------------------------


def _pairing_riemann(u, v, x, cells=4096):
    # dyadic midpoints are exact for controls whose breakpoints are dyadic
    T = x.horizon
    s = (np.arange(cells) + 0.5) * (T / cells)
    total = 0.0
    for si in s:
        total += float(np.dot(control_value(u, si) - control_value(v, si), control_value(x, si)))
    return total * T / cells


def test_square_wave_discrepancy_halves():
    D = dyadic_dictionary(1, 1.0, 4)
    zero = PiecewiseConstantControl.constant([0.0], 1.0)
    values = [weak_star_discrepancy(square_wave(k), zero, D) for k in (4, 8, 16, 32)]
    assert values == [0.25, 0.125, 0.0625, 0.0]


@given(st.sampled_from([1, 2, 4, 8, 16, 32]), st.integers(0, 4))
@settings(max_examples=40, deadline=None)
def test_pairing_matches_riemann_sum(k, depth):
    D = dyadic_dictionary(1, 1.0, depth)
    u = square_wave(k)
    zero = PiecewiseConstantControl.constant([0.0], 1.0)
    for x in D.functions[:: max(1, len(D) // 5)]:
        assert pairing_integral(u, zero, x) == pytest.approx(_pairing_riemann(u, zero, x), abs=1e-12)


def test_discrepancy_is_a_pseudometric():
    D = dyadic_dictionary(2, 1.0, 3)
    rng = np.random.default_rng(0)
    us = [PiecewiseConstantControl.uniform(rng.uniform(-1, 1, (5, 2)), 1.0) for _ in range(3)]
    a, b, c = us
    assert weak_star_discrepancy(a, a, D) == 0.0
    assert weak_star_discrepancy(a, b, D) == weak_star_discrepancy(b, a, D)
    assert weak_star_discrepancy(a, c, D) <= weak_star_discrepancy(a, b, D) + weak_star_discrepancy(b, c, D) + 1e-15


def test_weak_star_ball_selects_fast_chattering():
    D = dyadic_dictionary(1, 1.0, 2)
    zero = PiecewiseConstantControl.constant([0.0], 1.0)
    cands = [square_wave(k) for k in (2, 4, 8, 16)]
    assert weak_star_ball(zero, cands, D, 0.1) == [2, 3]


def test_dictionary_dimension_mismatch():
    with pytest.raises(DimensionError):
        weak_star_discrepancy(square_wave(2), square_wave(2), dyadic_dictionary(2, 1.0, 1))
