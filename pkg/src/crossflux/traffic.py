"""Ground-truth microscopic traffic on the approach links.

Arrivals are homogeneous Poisson per signal group.  Longitudinal motion is a
bounded-acceleration car-following rule: vehicles accelerate toward the free
speed, brake to hold the stopped spacing behind their leader, and stop at the
line on red.  On green the stop line acts as a server with the saturation
headway, which reproduces steady queue discharge.  Distances are measured to
the stop line and shrink toward zero; a vehicle whose distance passes zero on
green has crossed and leaves the model.
"""

from __future__ import annotations

import math
from collections import deque

from .scenario import Scenario

GATE_EPS_S = 1e-9


class Vehicle:
    __slots__ = ("vid", "signal_group", "approach", "lane", "distance_m",
                 "speed_mps", "entry_time_s", "crossing_time_s",
                 "free_flow_tt_s", "next_tx_s", "tx_seq")

    def __init__(self, vid, signal_group, approach, lane, distance_m, speed_mps,
                 entry_time_s, free_flow_tt_s):
        self.vid = vid
        self.signal_group = signal_group
        self.approach = approach
        self.lane = lane
        self.distance_m = distance_m
        self.speed_mps = speed_mps
        self.entry_time_s = entry_time_s
        self.crossing_time_s = None
        self.free_flow_tt_s = free_flow_tt_s
        self.next_tx_s = math.inf
        self.tx_seq = 0

    def __repr__(self):
        return (f"Vehicle({self.vid}, {self.signal_group}/{self.lane}, "
                f"d={self.distance_m:.2f}, v={self.speed_mps:.2f})")


def delay_of(vehicle: Vehicle) -> float:
    """Control delay: travel time in excess of the free-flow travel time."""
    if vehicle.crossing_time_s is None:
        raise ValueError(f"vehicle {vehicle.vid} has not crossed yet")
    return (vehicle.crossing_time_s - vehicle.entry_time_s) - vehicle.free_flow_tt_s


class TrafficModel:
    """Owns all vehicles of one run.  Strictly single-threaded."""

    def __init__(self, scenario: Scenario, arrival_rngs: dict):
        self.scenario = scenario
        self.layout = scenario.layout
        p = scenario.traffic
        self.v_free = p.free_speed_mps
        self.a_max = p.accel_mps2
        self.b_max = p.decel_mps2
        self.x_min = p.stopped_spacing_m
        self.h_sat = p.saturation_headway_s

        self.lanes: dict[tuple[str, int], list[Vehicle]] = {}
        self.last_cross: dict[tuple[str, int], float] = {}
        for g in self.layout.signal_groups:
            for k in range(g.lanes):
                self.lanes[(g.label, k)] = []
                self.last_cross[(g.label, k)] = -math.inf

        self._rng = arrival_rngs
        self._next_arrival: dict[str, float] = {}
        self._scale: dict[str, float] = {}
        self._pending: dict[str, deque] = {}
        for g in self.layout.signal_groups:
            flow = scenario.demand_veh_per_h.get(g.label, 0.0)
            self._pending[g.label] = deque()
            if flow > 0:
                self._scale[g.label] = 3600.0 / flow
                self._next_arrival[g.label] = float(self._rng[g.label].exponential(self._scale[g.label]))
            else:
                self._scale[g.label] = math.inf
                self._next_arrival[g.label] = math.inf

        self._next_vid = 0
        self.entered = 0
        self.exited = 0

    # --- queries ---------------------------------------------------------

    @property
    def active(self) -> int:
        return sum(len(v) for v in self.lanes.values())

    def vehicles(self):
        for vehicles in self.lanes.values():
            yield from vehicles

    def ground_truth_snapshot(self):
        """Exact (id, signal group, lane, distance, speed) tuples."""
        return [(v.vid, v.signal_group, v.lane, v.distance_m, v.speed_mps)
                for v in self.vehicles()]

    # --- dynamics --------------------------------------------------------

    def substep(self, t0: float, dt: float, greens) -> tuple[list[Vehicle], list[Vehicle]]:
        """Advance all vehicles by dt under the given green set, then admit
        arrivals due by the end of the sub-step.  Returns (crossed, entered)."""
        t_end = t0 + dt
        crossed: list[Vehicle] = []
        for lane_key, vehicles in self.lanes.items():
            if not vehicles:
                continue
            green = lane_key[0] in greens
            gate_open = green and (t_end - self.last_cross[lane_key]
                                   >= self.h_sat - GATE_EPS_S)
            hold_at_line = not gate_open
            leader_d = None
            remaining: list[Vehicle] = []
            for veh in vehicles:
                barrier = None
                if leader_d is not None:
                    barrier = leader_d + self.x_min
                if hold_at_line and (barrier is None or barrier < 0.0):
                    barrier = 0.0
                v_next = veh.speed_mps + self.a_max * dt
                if v_next > self.v_free:
                    v_next = self.v_free
                if barrier is not None:
                    gap = veh.distance_m - barrier
                    if gap < 0.0:
                        gap = 0.0
                    v_safe = math.sqrt(2.0 * self.b_max * gap)
                    if v_safe < v_next:
                        v_next = v_safe
                new_d = veh.distance_m - v_next * dt
                if barrier is not None and new_d < barrier:
                    new_d = barrier
                    v_next = (veh.distance_m - new_d) / dt
                veh.speed_mps = v_next
                veh.distance_m = new_d
                leader_d = new_d
                if new_d < 0.0:
                    veh.crossing_time_s = t_end
                    self.last_cross[lane_key] = t_end
                    self.exited += 1
                    crossed.append(veh)
                else:
                    remaining.append(veh)
            if len(remaining) != len(vehicles):
                self.lanes[lane_key] = remaining
        entered = self._admit_arrivals(t_end)
        return crossed, entered

    def _admit_arrivals(self, t_end: float) -> list[Vehicle]:
        entered: list[Vehicle] = []
        for g in self.layout.signal_groups:
            label = g.label
            while self._next_arrival[label] <= t_end:
                self._pending[label].append(self._next_arrival[label])
                self._next_arrival[label] += float(self._rng[label].exponential(self._scale[label]))
            while self._pending[label]:
                lane_idx = min(range(g.lanes), key=lambda k: (len(self.lanes[(label, k)]), k))
                lane = self.lanes[(label, lane_idx)]
                if lane and lane[-1].distance_m > g.link_length_m - self.x_min:
                    break  # entry blocked: defer, never drop
                veh = Vehicle(
                    vid=self._next_vid,
                    signal_group=label,
                    approach=g.approach,
                    lane=lane_idx,
                    distance_m=g.link_length_m,
                    speed_mps=self.v_free,
                    entry_time_s=t_end,
                    free_flow_tt_s=g.link_length_m / self.v_free,
                )
                self._next_vid += 1
                lane.append(veh)
                self.entered += 1
                self._pending[label].popleft()
                entered.append(veh)
        return entered

    def check_conservation(self):
        assert self.entered == self.exited + self.active, (
            f"conservation violated: {self.entered} != {self.exited} + {self.active}")
