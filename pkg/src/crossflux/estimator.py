"""Compensation for lost telemetry.

A vehicle that reported in the previous interval but not in the current one
is suspected of a failed transmission.  Its report is carried forward at
constant speed, bounded from below by its same-lane leader plus the minimum
spacing.  An extrapolated position past the stop line means the vehicle has
plausibly crossed: it is dropped if its movement has seen green since the
vehicle last reported, and otherwise pinned to the stop line (it cannot have
legally crossed on red).

Three practical refinements over plain dead reckoning:

* While a group is green, stationary estimates advance at least at the queue
  discharge speed (config-exposed).  A literal constant-speed rule would
  freeze a remembered stopped queue at the line forever, permanently faking
  demand.
* The crossed-or-not test uses "has this group shown green since the last
  real report" rather than the instantaneous indication, so vehicles that
  crossed right before a stage change do not linger as stop-line ghosts.
* A silent vehicle that was close enough to reach the line within one
  broadcast period (at its speed plus one step of acceleration) counts as
  crossed when green has shown; constant-speed reckoning alone undershoots
  for accelerating vehicles and would keep them alive just shy of the line.
"""

from __future__ import annotations

import math

from .controller import ESTIMATED, MEASURED, Registry, Report


def detect_missing(measured_ids, prev_registry: Registry) -> set[int]:
    """Ids reported (or estimated) last interval but not measured in this one."""
    return {vid for vid in prev_registry if vid not in measured_ids}


def extrapolate_position(prev: Report, leader_d: float | None, *,
                         x_min: float, sg_was_green: bool,
                         discharge_mps: float, dt: float = 1.0) -> float:
    """One dead-reckoning step: previous distance minus travelled distance,
    never closer to the line than the leader allows."""
    speed = prev.speed_mps
    if sg_was_green and speed < discharge_mps:
        speed = discharge_mps
    d = prev.distance_m - speed * dt
    if leader_d is not None:
        d = max(d, leader_d + x_min)
    return d


def merge(measured: Registry, prev: Registry, *, correction_on: bool,
          greens_last: frozenset | set, last_green_step: dict[str, float],
          step: int, x_min: float, discharge_mps: float,
          accel_mps2: float = 2.5, max_age: int | None = None) -> Registry:
    """Build the corrected registry for this step.

    Measured reports always win; estimates fill the gaps and re-extrapolate
    from their own previous value on consecutive losses.  With correction
    off this is the identity on the measured set.
    """
    if not correction_on:
        return dict(measured)

    result: Registry = dict(measured)
    missing = detect_missing(measured, prev)
    if not missing:
        return result

    # One broadcast per period means a silent vehicle went quiet within one
    # period of its last report, so a vehicle that actually crossed was close
    # enough to reach the line in a single step even while accelerating.
    crossing_reach = 0.5 * accel_mps2

    lanes: dict[tuple[str, int], list[int]] = {}
    for vid, rep in prev.items():
        lanes.setdefault((rep.signal_group, rep.lane), []).append(vid)
    for vid, rep in measured.items():
        if vid not in prev:
            lanes.setdefault((rep.signal_group, rep.lane), []).append(vid)

    for (sg, lane), vids in lanes.items():
        # Front-to-back in the controller's own picture of the lane, new
        # measured entrants behind by their reported position.
        vids.sort(key=lambda v: (prev[v].distance_m if v in prev
                                 else measured[v].distance_m, v))
        was_green = sg in greens_last
        # Crossing is possible only if green has shown since the last real
        # report (one consumed at tick m was sensed during interval m-1).
        last_green = last_green_step.get(sg, -math.inf)
        leader_d: float | None = None
        for vid in vids:
            if vid in measured:
                leader_d = measured[vid].distance_m
                continue
            if vid not in missing:
                continue
            old = prev[vid]
            may_have_crossed = last_green >= old.last_measured_step - 1
            if may_have_crossed and old.distance_m <= old.speed_mps + crossing_reach:
                continue
            d = extrapolate_position(old, leader_d, x_min=x_min,
                                     sg_was_green=was_green,
                                     discharge_mps=discharge_mps)
            if d < 0.0:
                if may_have_crossed:
                    continue
                d = 0.0  # cannot have crossed legally: pin to the stop line
            age = old.age_steps + 1
            if max_age is not None and age > max_age:
                continue
            rep = Report(vehicle_id=vid, distance_m=d, speed_mps=old.speed_mps,
                         lane=lane, signal_group=sg, origin=ESTIMATED,
                         age_steps=age, last_measured_step=old.last_measured_step)
            result[vid] = rep
            leader_d = d
    return result
