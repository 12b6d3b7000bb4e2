"""The integrated simulation loop.

Once per second, in order: the controller consumes the registry built from
the messages the roadside unit received during the *previous* second (the
one-step information delay of the co-simulation), traffic advances in
sub-steps under the commanded indications, due telemetry broadcasts are
generated and pushed through the channel, and the estimator (when enabled)
patches the registry for the next tick.  A shadow evaluation re-answers every
decision the controller faced using a lossless registry, without touching the
real state, so divergences caused purely by message loss can be counted.

Everything is deterministic given the run seed: arrivals and broadcast phases
draw from independent named substreams, and the channel itself consumes no
randomness.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import analytics, controller, estimator
from .channel import CamMessage, CommsCounters, deliver, schedule_first_cam
from .controller import Registry, Report
from .scenario import Condition, Scenario, validate
from .traffic import TrafficModel, delay_of

# Named RNG substreams of the run seed.
_ARRIVAL_STREAM = 1
_CAM_STREAM = 2

TRACE_LEVELS = ("summary", "decisions", "messages", "trajectories")

TRACE_FIELDS = (
    "t", "kind", "stage", "cycle", "green_elapsed", "reason",
    "checked_gap", "extend_actual", "extend_shadow",
    "min_gap_actual", "min_gap_shadow",
    "chosen_actual", "chosen_shadow",
    "chosen_score_actual", "chosen_score_shadow",
    "cycle_reset", "max_green_actual", "max_green_shadow",
    "delayed_candidates", "n_reports", "n_truth",
)


@dataclass
class RunConfig:
    scenario: Scenario
    condition: Condition
    seed: int
    warmup_s: float | None = None       # default: scenario.run values
    evaluation_s: float | None = None
    trace_level: str = "decisions"
    out_dir: str | None = None
    shadow: bool = True


@dataclass
class RunOutputs:
    summary: dict
    metrics: analytics.RunMetrics
    paths: dict[str, str] = field(default_factory=dict)


def _registry_from(msgs: list[CamMessage], step: int) -> Registry:
    reg: Registry = {}
    for m in msgs:
        reg[m.vehicle_id] = Report(
            vehicle_id=m.vehicle_id, distance_m=max(m.distance_m, 0.0),
            speed_mps=m.speed_mps, lane=m.lane, signal_group=m.signal_group,
            origin=controller.MEASURED, age_steps=0, last_measured_step=step)
    return reg


def run(cfg: RunConfig) -> RunOutputs:
    """Execute one replication and (optionally) write its logs."""
    scn = cfg.scenario
    violations = validate(scn)
    if violations:
        raise ValueError("scenario invalid: " + "; ".join(violations))
    if cfg.trace_level not in TRACE_LEVELS:
        raise ValueError(f"unknown trace level {cfg.trace_level!r}")

    layout = scn.layout
    control = scn.control
    chan = scn.channel
    cond = cfg.condition
    penalties = cond.penalties_by_approach(layout.approaches)
    correction_on = cond.correction
    warmup = scn.run.warmup_s if cfg.warmup_s is None else cfg.warmup_s
    evaluation = scn.run.evaluation_s if cfg.evaluation_s is None else cfg.evaluation_s
    total = int(round(warmup + evaluation))
    eval_start = warmup

    arrival_rngs = {
        g.label: np.random.default_rng([cfg.seed, _ARRIVAL_STREAM, i])
        for i, g in enumerate(layout.signal_groups)
    }
    cam_rng = np.random.default_rng([cfg.seed, _CAM_STREAM])

    traffic = TrafficModel(scn, arrival_rngs)
    state = controller.initial_state(layout, control)
    n_stages = len(layout.stages)
    shadow_max_green = controller.default_max_green(n_stages, control)
    shadow_stored: dict[int, float] = {state.stage: 0.0}
    shadow_pending = 0.0

    substeps = int(round(1.0 / scn.traffic.sub_step_s))
    sub_dt = 1.0 / substeps
    x_min = scn.traffic.stopped_spacing_m
    discharge = scn.estimator.green_discharge_mps
    max_age = scn.estimator.max_report_age_steps

    counters = CommsCounters(layout.approaches)
    delay_records: list[tuple[int, str, float]] = []
    vehicle_rows: list[tuple] = []
    trace: list[dict] = []
    message_rows: list[tuple] = []
    trajectory_rows: list[tuple] = []

    delivered_prev: list[CamMessage] = []
    sent_prev: list[CamMessage] = []
    prev_registry: Registry = {}
    greens_last: frozenset = frozenset()
    last_green_step: dict[str, float] = {}

    for t in range(total):
        measured = _registry_from(delivered_prev, t)
        if correction_on:
            registry = estimator.merge(
                measured, prev_registry, correction_on=True,
                greens_last=greens_last, last_green_step=last_green_step,
                step=t, x_min=x_min, discharge_mps=discharge,
                accel_mps2=scn.traffic.accel_mps2, max_age=max_age)
        else:
            registry = measured
        shadow_registry = _registry_from(sent_prev, t) if cfg.shadow else {}

        res = controller.control_tick(registry, state, control, layout)

        row = {
            "t": t, "kind": res.kind, "stage": res.stage, "cycle": state.cycle,
            "green_elapsed": res.green_elapsed, "reason": res.terminate_reason,
            "checked_gap": res.checked_gap,
            "extend_actual": res.extend_verdict, "extend_shadow": "",
            "min_gap_actual": res.min_gap_s, "min_gap_shadow": "",
            "chosen_actual": res.chosen_stage, "chosen_shadow": "",
            "chosen_score_actual": res.chosen_score, "chosen_score_shadow": "",
            "cycle_reset": res.cycle_reset,
            "max_green_actual": res.max_green_before, "max_green_shadow": "",
            "delayed_candidates": "",
            "n_reports": len(registry), "n_truth": traffic.active,
        }

        if cfg.shadow:
            if res.checked_gap:
                s_extend, s_gap = controller.extension_choice(
                    shadow_registry, layout, res.stage, control.max_gap_s)
                row["extend_shadow"] = s_extend
                row["min_gap_shadow"] = s_gap
            if res.kind == "terminate":
                s_group_w = controller.group_scores(
                    shadow_registry, layout, control.detection_range_m)
                s_stage_w = controller.stage_scores(s_group_w, layout)
                s_chosen = min(res.eligible, key=lambda s: (-s_stage_w[s], s))
                row["chosen_shadow"] = s_chosen
                row["chosen_score_shadow"] = s_stage_w[s_chosen]
                row["max_green_shadow"] = shadow_max_green[res.stage]
                shadow_pending = s_stage_w[res.chosen_stage]
                # truth vehicles close enough to have merited the extension
                counts: dict[str, int] = {}
                for _, sg, _, d, v in traffic.ground_truth_snapshot():
                    if sg in layout.stages[res.stage]:
                        if d / max(v, controller.GAP_SPEED_FLOOR_MPS) <= control.max_gap_s:
                            counts[sg] = counts.get(sg, 0) + 1
                row["delayed_candidates"] = ";".join(
                    f"{sg}:{counts[sg]}" for sg in layout.stages[res.stage] if sg in counts)
                if res.cycle_reset:
                    shadow_max_green = controller.allocate_max_green(
                        shadow_stored, n_stages, control)
                    shadow_stored = {}
            elif res.kind == "activate":
                shadow_stored[res.stage] = shadow_pending
                row["chosen_score_shadow"] = shadow_pending
        trace.append(row)

        greens = frozenset(res.greens)
        sent: list[CamMessage] = []
        for k in range(substeps):
            t0 = t + k * sub_dt
            t_sub_end = t0 + sub_dt
            crossed, entered = traffic.substep(t0, sub_dt, greens)
            for veh in entered:
                veh.next_tx_s = veh.entry_time_s + float(
                    schedule_first_cam(cam_rng, chan.cam_period_s))
            for veh in crossed:
                if eval_start <= veh.crossing_time_s <= total:
                    d = delay_of(veh)
                    delay_records.append((veh.vid, veh.signal_group, d))
                    vehicle_rows.append((veh.vid, veh.signal_group, veh.lane,
                                         veh.entry_time_s, veh.crossing_time_s, d))
            for veh in traffic.vehicles():
                while veh.next_tx_s <= t_sub_end + 1e-9:
                    if veh.distance_m <= chan.tx_range_m:
                        sent.append(CamMessage(
                            vehicle_id=veh.vid, seq=veh.tx_seq, t=veh.next_tx_s,
                            distance_m=veh.distance_m, speed_mps=veh.speed_mps,
                            lane=veh.lane, signal_group=veh.signal_group,
                            approach=veh.approach))
                    veh.next_tx_s += chan.cam_period_s
                    veh.tx_seq += 1

        delivered, budgets = deliver(sent, chan, penalties, cond.lossless)
        for msg, budget in zip(sent, budgets):
            if eval_start <= msg.t < total:
                counters.record(msg.approach, budget.delivered)
            if cfg.trace_level in ("messages", "trajectories"):
                message_rows.append((msg.t, msg.vehicle_id, msg.approach,
                                     msg.distance_m, budget.snr_db, budget.delivered))
        if cfg.trace_level == "trajectories":
            for vid, sg, lane, d, v in traffic.ground_truth_snapshot():
                trajectory_rows.append((t + 1, vid, sg, lane, d, v))

        traffic.check_conservation()
        delivered_prev = delivered
        sent_prev = sent
        prev_registry = registry
        for sg in greens:
            last_green_step[sg] = t
        greens_last = greens

    events = analytics.phenomenon_events(trace, layout, t_min=eval_start, t_max=total)
    metrics = analytics.RunMetrics(counters=counters, delay_records=delay_records,
                                   trace=trace, events=events)
    summary = _build_summary(cfg, penalties, warmup, evaluation, metrics, layout)
    paths = _write_outputs(cfg, summary, metrics, vehicle_rows,
                           message_rows, trajectory_rows)
    return RunOutputs(summary=summary, metrics=metrics, paths=paths)


def _build_summary(cfg: RunConfig, penalties, warmup, evaluation,
                   metrics: analytics.RunMetrics, layout) -> dict:
    counters = metrics.counters
    per_sg: dict[str, dict] = {}
    for _, sg, d in metrics.delay_records:
        slot = per_sg.setdefault(sg, {"n": 0, "total": 0.0})
        slot["n"] += 1
        slot["total"] += d
    delays = [d for _, _, d in metrics.delay_records]
    west_sent = counters.sent["west"]
    west_rec = counters.received["west"]
    all_sent, all_rec = counters.totals()
    summary = {
        "seed": cfg.seed,
        "lossless": cfg.condition.lossless,
        "penalties_db_by_approach": {a: penalties[a] for a in layout.approaches},
        "warmup_s": warmup,
        "evaluation_s": evaluation,
        "messages": {
            "by_approach": {a: {"sent": counters.sent[a], "received": counters.received[a]}
                            for a in layout.approaches},
            "all": {"sent": all_sent, "received": all_rec},
        },
        "mlr": {
            "all": analytics.mlr(all_sent, all_rec),
            "west": analytics.mlr(west_sent, west_rec),
            "others": analytics.mlr(all_sent - west_sent, all_rec - west_rec),
        },
        "delay": {
            "mean_s": (sum(delays) / len(delays)) if delays else None,
            "n": len(delays),
            "per_group": {sg: {"mean_s": v["total"] / v["n"], "n": v["n"]}
                          for sg, v in sorted(per_sg.items())},
        },
        "events": metrics.events,
    }
    return summary


def _write_outputs(cfg: RunConfig, summary, metrics, vehicle_rows,
                   message_rows, trajectory_rows) -> dict[str, str]:
    if cfg.out_dir is None:
        return {}
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    path = os.path.join(cfg.out_dir, "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["summary"] = path

    if cfg.trace_level == "summary":
        return paths

    path = os.path.join(cfg.out_dir, "decisions.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(metrics.trace)
    paths["decisions"] = path

    path = os.path.join(cfg.out_dir, "vehicles.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("vid", "signal_group", "lane", "entry_s", "crossing_s", "delay_s"))
        writer.writerows(vehicle_rows)
    paths["vehicles"] = path

    if cfg.trace_level in ("messages", "trajectories"):
        path = os.path.join(cfg.out_dir, "messages.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t", "vehicle_id", "approach", "distance_m",
                             "snr_db", "delivered"))
            writer.writerows(message_rows)
        paths["messages"] = path

    if cfg.trace_level == "trajectories":
        path = os.path.join(cfg.out_dir, "trajectories.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t", "vid", "signal_group", "lane", "distance_m", "speed_mps"))
            writer.writerows(trajectory_rows)
        paths["trajectories"] = path
    return paths
