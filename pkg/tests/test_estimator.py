"""Estimator tests: loss detection, the dead-reckoning update with its
leader bound, stop-line clamping vs crossed-discard, and registry merging.

The multi-step sequence below was computed by hand from the update rule
(d' = max(d - v, leader + x_min), speed carried over) and is frozen here.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossflux.controller import ESTIMATED, MEASURED, Report
from crossflux.estimator import detect_missing, extrapolate_position, merge

X_MIN = 7.0
NO_GREEN: dict[str, float] = {}


def rep(vid, d, v, sg="west_tr", lane=0, origin=MEASURED, age=0, measured_at=0):
    return Report(vehicle_id=vid, distance_m=d, speed_mps=v, lane=lane,
                  signal_group=sg, origin=origin, age_steps=age,
                  last_measured_step=measured_at)


def do_merge(measured, prev, step, greens_last=frozenset(),
             last_green_step=NO_GREEN, discharge=3.5, max_age=None):
    return merge(measured, prev, correction_on=True, greens_last=greens_last,
                 last_green_step=last_green_step, step=step, x_min=X_MIN,
                 discharge_mps=discharge, max_age=max_age)


# --- detection ---------------------------------------------------------------

def test_detect_missing_examples():
    prev = {7: rep(7, 50.0, 10.0), 9: rep(9, 80.0, 10.0)}
    assert detect_missing({7, 9}, prev) == set()
    assert detect_missing({7}, prev) == {9}
    assert detect_missing(set(), {}) == set()


# --- single-step extrapolation ------------------------------------------------

def test_extrapolation_leader_bound_example():
    prev = rep(1, 50.0, 10.0)
    d = extrapolate_position(prev, leader_d=35.0, x_min=X_MIN,
                             sg_was_green=False, discharge_mps=3.5)
    assert d == pytest.approx(42.0)          # max(40, 35+7)


def test_extrapolation_without_leader():
    prev = rep(1, 50.0, 10.0)
    d = extrapolate_position(prev, leader_d=None, x_min=X_MIN,
                             sg_was_green=False, discharge_mps=3.5)
    assert d == pytest.approx(40.0)


def test_red_clamp_at_stop_line():
    prev = {1: rep(1, 5.0, 10.0, measured_at=6)}
    out = do_merge({}, prev, step=7)          # no green ever shown
    assert out[1].distance_m == 0.0
    assert out[1].speed_mps == 10.0           # speed memory unchanged
    assert out[1].origin == ESTIMATED
    assert out[1].age_steps == 1


def test_green_discard_past_stop_line():
    prev = {1: rep(1, 5.0, 10.0, measured_at=6)}
    out = do_merge({}, prev, step=7, greens_last=frozenset({"west_tr"}),
                   last_green_step={"west_tr": 6.0})
    assert 1 not in out


def test_green_since_last_report_discards_even_after_switch_to_red():
    # crossed during a green interval that ended before this step: the
    # indication is red *now*, but green has shown since the last report
    prev = {1: rep(1, 5.0, 10.0, measured_at=6)}
    out = do_merge({}, prev, step=8, greens_last=frozenset(),
                   last_green_step={"west_tr": 6.0})
    assert 1 not in out


def test_no_green_since_report_clamps():
    prev = {1: rep(1, 5.0, 10.0, measured_at=6)}
    out = do_merge({}, prev, step=8, greens_last=frozenset(),
                   last_green_step={"west_tr": 3.0})   # green long before contact
    assert out[1].distance_m == 0.0


# --- the frozen 3-vehicle sequence -------------------------------------------

def test_hand_computed_three_vehicle_sequence():
    registry = {1: rep(1, 30.0, 5.0), 2: rep(2, 50.0, 10.0), 3: rep(3, 80.0, 12.0)}
    expected = [
        {1: 25.0, 2: 40.0, 3: 68.0},
        {1: 20.0, 2: 30.0, 3: 56.0},
        {1: 15.0, 2: 22.0, 3: 44.0},   # leader bound binds on vehicle 2
        {1: 10.0, 2: 17.0, 3: 32.0},
        {1: 5.0, 2: 12.0, 3: 20.0},    # leader bound binds on vehicle 3
    ]
    for step, want in enumerate(expected, start=1):
        registry = do_merge({}, registry, step=step)
        got = {vid: r.distance_m for vid, r in registry.items()}
        assert got == pytest.approx(want)
        assert {r.speed_mps for r in registry.values()} == {5.0, 10.0, 12.0}
        assert all(r.age_steps == step for r in registry.values())
    # two more red steps: the remembered queue stacks at the line
    registry = do_merge({}, registry, step=6)
    assert {v: r.distance_m for v, r in registry.items()} == pytest.approx(
        {1: 0.0, 2: 7.0, 3: 14.0})
    registry = do_merge({}, registry, step=7)
    assert {v: r.distance_m for v, r in registry.items()} == pytest.approx(
        {1: 0.0, 2: 7.0, 3: 14.0})
    # green: the stack discharges front-first at the discharge floor
    greens = frozenset({"west_tr"})
    green_step = {"west_tr": 7.0}
    registry = do_merge({}, registry, step=8, greens_last=greens,
                        last_green_step=green_step)
    assert set(registry) == {3}
    assert registry[3].distance_m == pytest.approx(2.0)
    registry = do_merge({}, registry, step=9, greens_last=greens,
                        last_green_step=green_step)
    assert registry == {}


# --- merging ------------------------------------------------------------------

def test_measured_wins_over_estimate():
    prev = {1: rep(1, 50.0, 10.0, origin=ESTIMATED, age=2, measured_at=1)}
    fresh = {1: rep(1, 44.0, 9.0, measured_at=3)}
    out = do_merge(fresh, prev, step=3)
    assert out[1].origin == MEASURED
    assert out[1].distance_m == 44.0
    assert out[1].age_steps == 0


def test_correction_off_is_identity_on_measured():
    prev = {1: rep(1, 50.0, 10.0), 2: rep(2, 90.0, 10.0)}
    fresh = {1: rep(1, 44.0, 9.0, measured_at=3)}
    out = merge(fresh, prev, correction_on=False, greens_last=frozenset(),
                last_green_step=NO_GREEN, step=3, x_min=X_MIN, discharge_mps=3.5)
    assert out == fresh


def test_no_losses_means_merge_is_identity():
    prev = {1: rep(1, 50.0, 10.0), 2: rep(2, 90.0, 12.0)}
    fresh = {1: rep(1, 40.0, 10.0, measured_at=1),
             2: rep(2, 78.0, 12.0, measured_at=1)}
    assert do_merge(fresh, prev, step=1) == fresh


def test_estimate_respects_fresh_measured_leader():
    prev = {1: rep(1, 40.0, 3.0), 2: rep(2, 48.0, 12.0)}
    fresh = {1: rep(1, 38.0, 2.0, measured_at=1)}      # leader measured
    out = do_merge(fresh, prev, step=1)
    assert out[2].origin == ESTIMATED
    assert out[2].distance_m == pytest.approx(45.0)    # max(36, 38+7)


def test_age_cap_drops_old_estimates():
    prev = {1: rep(1, 200.0, 0.0, origin=ESTIMATED, age=3, measured_at=0)}
    assert 1 in do_merge({}, prev, step=4, max_age=4)
    prev = {1: rep(1, 200.0, 0.0, origin=ESTIMATED, age=4, measured_at=0)}
    assert 1 not in do_merge({}, prev, step=5, max_age=4)


@given(st.lists(st.tuples(st.floats(min_value=0.0, max_value=400.0),
                          st.floats(min_value=0.0, max_value=14.0)),
                min_size=1, max_size=8))
@settings(max_examples=60, deadline=None)
def test_estimates_never_move_backward_in_consistent_lanes(cars):
    # spacing-consistent single lane, everything lost for one step
    cars = sorted(cars)
    prev = {}
    d_prev = None
    for vid, (d, v) in enumerate(cars):
        if d_prev is not None and d < d_prev + X_MIN:
            d = d_prev + X_MIN
        prev[vid] = rep(vid, d, v)
        d_prev = d
    out = do_merge({}, prev, step=1)
    leader_d = None
    for vid in sorted(prev, key=lambda i: prev[i].distance_m):
        if vid not in out:      # discarded past the line under green only
            continue
        assert out[vid].distance_m <= prev[vid].distance_m + 1e-9
        if leader_d is not None:
            assert out[vid].distance_m >= leader_d + X_MIN - 1e-9
        leader_d = out[vid].distance_m
