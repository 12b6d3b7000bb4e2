"""Adaptive stage controller.

Once per second the controller either extends the active stage, terminates it
and starts an all-red interstage toward the highest-scoring eligible stage,
or keeps resting when the network is empty.  Scores weight each reported
vehicle by its proximity to the stop line; per-cycle maximum greens are
reallocated in proportion to the scores the stages had when they were picked.

Everything here is a pure function of (registry, state); the state is a small
mutable record owned by the engine.  ``control_tick`` is the only mutator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .scenario import ControlParams, IntersectionLayout

# Reported speeds below this floor are treated as this speed when projecting
# arrival times at the stop line, so stopped vehicles register demand.
GAP_SPEED_FLOOR_MPS = 1.0

MEASURED = "measured"
ESTIMATED = "estimated"


@dataclass(frozen=True)
class Report:
    """One vehicle as the controller currently believes it to be."""
    vehicle_id: int
    distance_m: float
    speed_mps: float
    lane: int
    signal_group: str
    origin: str = MEASURED          # measured | estimated
    age_steps: int = 0              # steps since the last measured report
    last_measured_step: int = 0     # tick at which that report was consumed


Registry = dict[int, Report]


# --- scoring (the demand model) -------------------------------------------

def vehicle_score(distance_m: float, detection_range_m: float) -> float:
    """Proximity score in [0, 1]: 1 at the stop line, 0 beyond the range."""
    if distance_m < 0:
        raise ValueError(f"distance must be >= 0, got {distance_m}")
    if detection_range_m <= 0:
        raise ValueError("detection range must be > 0")
    return max(0.0, 1.0 - distance_m / detection_range_m)


def group_scores(registry: Registry, layout: IntersectionLayout,
                 detection_range_m: float) -> dict[str, float]:
    """Sum of vehicle scores per signal group; zero for unreported groups."""
    scores = {label: 0.0 for label in layout.sg_labels}
    for rep in registry.values():
        if rep.signal_group in scores:
            scores[rep.signal_group] += vehicle_score(rep.distance_m, detection_range_m)
    return scores


def stage_scores(group_w: dict[str, float], layout: IntersectionLayout) -> list[float]:
    """Sum of member-group scores per stage (a group in two stages counts in both)."""
    return [sum(group_w[label] for label in members) for members in layout.stages]


def gap_time(registry: Registry, lane_key: tuple[str, int]) -> float:
    """Projected stop-line headway of a lane: min over its reported vehicles
    of distance / speed, with the speed floored.  +inf when nothing reported."""
    sg, lane = lane_key
    best = math.inf
    for rep in registry.values():
        if rep.signal_group == sg and rep.lane == lane:
            g = rep.distance_m / max(rep.speed_mps, GAP_SPEED_FLOOR_MPS)
            if g < best:
                best = g
    return best


def min_stage_gap(registry: Registry, layout: IntersectionLayout, stage: int) -> float:
    """Smallest projected headway over all lanes the stage controls."""
    gaps = {}
    for rep in registry.values():
        key = (rep.signal_group, rep.lane)
        g = rep.distance_m / max(rep.speed_mps, GAP_SPEED_FLOOR_MPS)
        if g < gaps.get(key, math.inf):
            gaps[key] = g
    best = math.inf
    for key in layout.lanes_of_stage(stage):
        g = gaps.get(key, math.inf)
        if g < best:
            best = g
    return best


def extension_choice(registry: Registry, layout: IntersectionLayout,
                     stage: int, max_gap_s: float) -> tuple[bool, float]:
    """Gap rule: extend while at least one active lane still discharges,
    i.e. its projected headway is below the gap threshold."""
    gap = min_stage_gap(registry, layout, stage)
    return gap < max_gap_s, gap


def select_next_stage(w_st: list[float], activated: set[int], served: set[str],
                      layout: IntersectionLayout) -> int:
    """Highest-scoring stage among those not yet activated this cycle that
    still contain an unserved signal group; ties go to the lowest index."""
    eligible = [s for s in range(len(layout.stages))
                if s not in activated
                and any(g not in served for g in layout.stages[s])]
    if not eligible:
        raise RuntimeError("no eligible stage: cycle bookkeeping is inconsistent")
    return min(eligible, key=lambda s: (-w_st[s], s))


def allocate_max_green(stored_w: dict[int, float], n_stages: int,
                       control: ControlParams) -> list[float]:
    """Split the total green extension between stages in proportion to the
    scores they were activated with; stages that never ran get the minimum."""
    total = sum(stored_w.values())
    if total <= 0.0:
        share = control.total_extension_s / n_stages
        return [control.min_green_s + share for _ in range(n_stages)]
    return [control.min_green_s + (stored_w.get(s, 0.0) / total) * control.total_extension_s
            for s in range(n_stages)]


def default_max_green(n_stages: int, control: ControlParams) -> list[float]:
    """Before any cycle completes every stage gets an equal share."""
    share = control.total_extension_s / n_stages
    return [control.min_green_s + share for _ in range(n_stages)]


# --- the per-second decision state machine --------------------------------

GREEN = "green"
INTERSTAGE = "interstage"


@dataclass
class ControllerState:
    phase: str                       # GREEN or INTERSTAGE
    stage: int                       # active (or pending, during interstage) stage
    green_elapsed: float = 0.0       # completed green seconds of the active stage
    interstage_elapsed: float = 0.0
    pending_score: float = 0.0       # score the pending stage was selected with
    activated: set[int] = field(default_factory=set)
    served: set[str] = field(default_factory=set)
    stored_w: dict[int, float] = field(default_factory=dict)
    max_green: list[float] = field(default_factory=list)
    cycle: int = 0


def initial_state(layout: IntersectionLayout, control: ControlParams,
                  first_stage: int = 0) -> ControllerState:
    state = ControllerState(phase=GREEN, stage=first_stage)
    state.max_green = default_max_green(len(layout.stages), control)
    state.activated.add(first_stage)
    state.served.update(layout.stages[first_stage])
    state.stored_w[first_stage] = 0.0
    return state


@dataclass
class TickResult:
    kind: str                        # interstage | activate | extend | rest | terminate
    greens: tuple[str, ...]          # signal groups shown green this interval
    stage: int                       # stage the row refers to
    green_elapsed: float = 0.0       # elapsed at decision time (green-phase kinds)
    checked_gap: bool = False        # True when the gap rule was evaluated
    extend_verdict: bool = False
    min_gap_s: float = math.inf
    terminate_reason: str = ""       # "gap" or "max"
    chosen_stage: int = -1
    chosen_score: float = 0.0
    eligible: tuple[int, ...] = ()
    stage_w: tuple[float, ...] = ()
    cycle_reset: bool = False
    max_green_before: float = 0.0    # active stage's cap when terminating


def control_tick(registry: Registry, state: ControllerState,
                 control: ControlParams, layout: IntersectionLayout) -> TickResult:
    """Advance the controller by one second and return what it decided."""
    n_stages = len(layout.stages)

    if state.phase == INTERSTAGE:
        state.interstage_elapsed += 1.0
        if state.interstage_elapsed < control.interstage_s:
            return TickResult(kind="interstage", greens=(), stage=state.stage)
        # interstage complete: the pending stage goes green.  The activation
        # tick schedules the first green second, so the timer starts at 1.
        state.phase = GREEN
        state.green_elapsed = 1.0
        state.activated.add(state.stage)
        state.served.update(layout.stages[state.stage])
        state.stored_w[state.stage] = state.pending_score
        return TickResult(kind="activate", greens=layout.stages[state.stage],
                          stage=state.stage)

    stage = state.stage
    greens = layout.stages[stage]
    elapsed = state.green_elapsed
    group_w = group_scores(registry, layout, control.detection_range_m)

    if elapsed < control.min_green_s:
        state.green_elapsed += 1.0
        return TickResult(kind="extend", greens=greens, stage=stage,
                          green_elapsed=elapsed)

    max_green = state.max_green[stage]
    extend, min_gap = extension_choice(registry, layout, stage, control.max_gap_s)
    # greens run in whole seconds: extend only when one more second still fits
    if elapsed + 1.0 <= max_green:
        if extend:
            state.green_elapsed += 1.0
            return TickResult(kind="extend", greens=greens, stage=stage,
                              green_elapsed=elapsed, checked_gap=True,
                              extend_verdict=True, min_gap_s=min_gap)
        reason = "gap"
    else:
        reason = "max"

    if all(w == 0.0 for w in group_w.values()):
        # empty network: rest in the current green, timer pinned at min green
        state.green_elapsed = min(elapsed, control.min_green_s)
        return TickResult(kind="rest", greens=greens, stage=stage,
                          green_elapsed=elapsed, checked_gap=True,
                          extend_verdict=extend, min_gap_s=min_gap)

    # terminate: close the cycle if every group with demand has been served
    cycle_reset = all(label in state.served
                      for label, w in group_w.items() if w > 0.0)
    if cycle_reset:
        state.max_green = allocate_max_green(state.stored_w, n_stages, control)
        state.activated.clear()
        state.served.clear()
        state.stored_w.clear()
        state.cycle += 1

    w_st = stage_scores(group_w, layout)
    eligible = tuple(s for s in range(n_stages)
                     if s not in state.activated
                     and any(g not in state.served for g in layout.stages[s]))
    chosen = select_next_stage(w_st, state.activated, state.served, layout)

    result = TickResult(kind="terminate", greens=(), stage=stage,
                        green_elapsed=elapsed, checked_gap=True,
                        extend_verdict=extend, min_gap_s=min_gap,
                        terminate_reason=reason, chosen_stage=chosen,
                        chosen_score=w_st[chosen], eligible=eligible,
                        stage_w=tuple(w_st), cycle_reset=cycle_reset,
                        max_green_before=max_green)
    state.phase = INTERSTAGE
    state.stage = chosen
    state.interstage_elapsed = 0.0
    state.pending_score = w_st[chosen]
    return result
