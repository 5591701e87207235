import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import barrier_action, infinity_loop, well_action
from tunnelsplit.contour import (
    PathSpec,
    check_clearance,
    circle,
    continue_along,
    ellipse,
    rectangle,
    residue_at_infinity,
    residue_at_infinity_quadrature,
    segment_action,
)
from tunnelsplit.errors import NotAdjacent, PathThroughSingularity, TimeSingularity
from tunnelsplit.models import P, Q, double_well, harmonic_oscillator, triple_well

DW = double_well().curve(0)
ASYM_ROOTS = (-2, -1, 1, 3)
ASYM = double_well(ASYM_ROOTS).curve(0)


def test_straight_path_on_constant_sheet():
    F = P * P - 1
    r = continue_along(F, PathSpec([0, 1], 1.0))
    assert abs(r.action - 1) < 1e-13
    assert abs(r.end_value - 1) < 1e-13


def test_one_turn_around_branch_point_swaps_sheets():
    r = continue_along(DW, PathSpec(circle(-1.0, 0.3, 64), 1j))
    assert r.permutation == (1, 0)
    assert abs(r.end_value + r.start_value) < 1e-10


def test_one_turn_action_shrinks_like_r_to_three_halves():
    a1 = abs(continue_along(DW, PathSpec(circle(-1.0, 0.04, 64), 1j)).action)
    a2 = abs(continue_along(DW, PathSpec(circle(-1.0, 0.01, 64), 1j)).action)
    assert abs(a1 / a2 - 4**1.5) < 0.2


def test_closed_gamma_loop_around_branch_point_vanishes():
    ring = circle(-1.0, 0.3, 64)
    r = continue_along(DW, PathSpec(list(ring) + list(ring[1:]), 1j))
    assert abs(r.action) < 1e-9
    assert abs(r.end_value - r.start_value) < 1e-10


def test_rectangle_around_all_branch_points_gives_well_difference():
    # clockwise rectangle on the sheet p ~ +i|p| right of q_4
    r = continue_along(ASYM, PathSpec(rectangle(-3.0, 4.0, 1.0), 1j))
    SL = well_action(ASYM_ROOTS, -2, -1)
    SR = well_action(ASYM_ROOTS, 1, 3)
    assert abs(abs(r.action.real) - abs(SL - SR)) < 1e-8
    assert abs(r.action.imag) < 1e-8


def test_enclosing_two_branch_points_gives_twice_the_segment():
    r = continue_along(DW, PathSpec(ellipse(-2, -1, 0.3, 128), 1.0))
    assert abs(abs(r.action) - well_action((-2, -1, 1, 2), -2, -1)) < 1e-9


# ---------------------------------------------------------------------------
# segment actions
# ---------------------------------------------------------------------------


def test_harmonic_half_loop():
    E = 0.37
    F = harmonic_oscillator().curve(E)
    a = math.sqrt(2 * E)
    s = segment_action(F, -a, a)
    assert abs(s - math.pi * E) < 1e-12


def test_barrier_segment_is_imaginary_and_matches_quadrature():
    s = segment_action(DW, -1, 1, "imag_positive")
    assert abs(s.real) < 1e-12
    assert abs(2 * s.imag - barrier_action((-2, -1, 1, 2), -1, 1)) < 1e-10


def test_well_segment_is_real():
    s = segment_action(DW, -2, -1)
    assert abs(s.imag) < 1e-10
    assert abs(2 * s.real - well_action((-2, -1, 1, 2), -2, -1)) < 1e-10


def test_segment_rejects_non_adjacent_points():
    with pytest.raises(NotAdjacent):
        segment_action(DW, -2, 1)


def _stadium(a, b, r, n=64):
    """Segment [a, b] hugged at distance r with semicircular caps."""
    up = np.linspace(a, b, n) + 1j * r
    cap_b = b + r * np.exp(1j * np.linspace(np.pi / 2, -np.pi / 2, n))
    down = np.linspace(b, a, n) - 1j * r
    cap_a = a + r * np.exp(1j * np.linspace(-np.pi / 2, -3 * np.pi / 2, n))
    return list(up) + list(cap_b[1:]) + list(down[1:]) + list(cap_a[1:-1])


@pytest.mark.parametrize("r", [1e-2, 1e-3])
def test_segment_equals_indented_loop(r):
    seg = segment_action(DW, -2, -1)
    loop = continue_along(DW, PathSpec(_stadium(-2.0, -1.0, r), 1j, closed=True))
    assert abs(abs(loop.action) - 2 * abs(seg)) < 1e-7


def test_time_singularity_on_turning_point():
    with pytest.raises((TimeSingularity, PathThroughSingularity)):
        continue_along(DW, PathSpec([-1.5, -1.0 + 1e-30], 0))


def test_clearance_violation():
    with pytest.raises(PathThroughSingularity):
        check_clearance(DW, [-3 + 0j, -1 + 1e-12j])


# ---------------------------------------------------------------------------
# homotopy invariance
# ---------------------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-0.08, 0.08), min_size=8, max_size=8))
def test_action_invariant_under_waypoint_perturbation(shifts):
    base = circle(1.5, 0.35, 8)
    moved = [z + s * (1 + 1j) for z, s in zip(base, shifts)]
    tol = 1e-10
    a = continue_along(DW, PathSpec(base, 1j, closed=True), tol=tol).action
    b = continue_along(DW, PathSpec(moved, 1j, closed=True), tol=tol).action
    assert abs(a - b) < 10 * tol * (1 + abs(a))


# ---------------------------------------------------------------------------
# residue at infinity
# ---------------------------------------------------------------------------


def test_symmetric_double_well_has_no_residue_at_infinity():
    assert abs(residue_at_infinity(DW)) < 1e-12


def test_asymmetric_residue_matches_oracle():
    F = double_well(ASYM_ROOTS).curve(0)
    s = residue_at_infinity(F)
    assert abs(abs(s) - abs(infinity_loop(ASYM_ROOTS))) < 1e-9


@pytest.mark.parametrize("R", [50.0, 100.0])
def test_residue_series_matches_large_circle(R):
    F = double_well(ASYM_ROOTS).curve(0)
    assert abs(residue_at_infinity(F) - residue_at_infinity_quadrature(F, radius=R, n=1024)) < 1e-8


def test_triple_well_residue_matches_oracle():
    roots = (-3, -2, -0.5, 1, 2, 3)
    F = triple_well(roots).curve(0)
    assert abs(abs(residue_at_infinity(F)) - abs(infinity_loop(roots))) < 1e-8
