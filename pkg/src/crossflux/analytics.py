"""Post-processing: message loss ratios, delay statistics with significance
against the baseline, and counts of the three decision-level failure
phenomena (late/early stage provision, green-time misallocation, wrongful
terminations with the vehicles they strand).

Everything here is a pure function of the engine logs; recomputing any
summary from the written CSV/JSON files gives the same numbers.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

from scipy import stats as _sstats

from .channel import CommsCounters
from .scenario import IntersectionLayout


@dataclass
class RunMetrics:
    counters: CommsCounters
    delay_records: list            # (vehicle id, signal group, delay s)
    trace: list                    # decision rows (see engine.TRACE_FIELDS)
    events: dict


def mlr(sent: int, received: int) -> float | None:
    """Message loss ratio 1 - received/sent; None when nothing was sent."""
    if sent <= 0:
        return None
    if not (0 <= received <= sent):
        raise ValueError(f"received {received} outside [0, {sent}]")
    return 1.0 - received / sent


def welch_t(a, b) -> float:
    """Two-sided Welch's t-test p-value for a difference in means."""
    a = list(a)
    b = list(b)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least 2 replications per sample")
    n1, n2 = len(a), len(b)
    m1 = sum(a) / n1
    m2 = sum(b) / n2
    v1 = sum((x - m1) ** 2 for x in a) / (n1 - 1)
    v2 = sum((x - m2) ** 2 for x in b) / (n2 - 1)
    if v1 == 0.0 and v2 == 0.0:
        return 1.0 if m1 == m2 else 0.0
    se2 = v1 / n1 + v2 / n2
    tstat = (m1 - m2) / math.sqrt(se2)
    df = se2 ** 2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    return float(2.0 * _sstats.t.sf(abs(tstat), df))


def _mean_sd(values) -> tuple[float | None, float | None]:
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    m = sum(values) / len(values)
    if len(values) < 2:
        return m, None
    sd = math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))
    return m, sd


@dataclass
class DelaySummary:
    mean_s: float | None
    sd_s: float | None
    per_group: dict                 # sg -> (mean, sd)
    delta_pct: float | None = None
    per_group_delta: dict | None = None


def delay_summary(replication_records, baseline: DelaySummary | None = None) -> DelaySummary:
    """Aggregate per-vehicle (signal group, delay) records replication-wise:
    replication means are the unit of analysis, like the study's tables."""
    rep_means = []
    group_rep_means: dict[str, list[float]] = {}
    for records in replication_records:
        if records:
            rep_means.append(sum(d for _, d in records) / len(records))
        per_group: dict[str, list[float]] = {}
        for sg, d in records:
            per_group.setdefault(sg, []).append(d)
        for sg, ds in per_group.items():
            group_rep_means.setdefault(sg, []).append(sum(ds) / len(ds))
    mean, sd = _mean_sd(rep_means)
    per_group = {sg: _mean_sd(ms) for sg, ms in sorted(group_rep_means.items())}
    out = DelaySummary(mean_s=mean, sd_s=sd, per_group=per_group)
    if baseline is not None and baseline.mean_s and mean is not None:
        out.delta_pct = 100.0 * (mean - baseline.mean_s) / baseline.mean_s
        out.per_group_delta = {}
        for sg, (m, _) in per_group.items():
            base = baseline.per_group.get(sg, (None, None))[0]
            if base and m is not None:
                out.per_group_delta[sg] = 100.0 * (m - base) / base
    return out


# --- failure phenomena from the decision trace ------------------------------

def _as_bool(v):
    if isinstance(v, bool):
        return v
    if v in ("True", "true"):
        return True
    if v in ("False", "false"):
        return False
    return None


def _as_float(v):
    if v == "" or v is None:
        return None
    return float(v)


def _as_int(v, default=None):
    if v == "" or v is None:
        return default
    return int(v)


def phenomenon_events(trace, layout: IntersectionLayout,
                      t_min: float = 0.0, t_max: float = math.inf) -> dict:
    """Count the three decision-level effects of message loss.

    * A switch divergence at a termination where the lossless shadow would
      have picked another stage: groups of the shadow's stage get a "late"
      mark, groups of the actually chosen stage an "early" one.
    * Green-time loss when a stage maxed out on an undersized cap while the
      shadow still saw discharge demand; gain when the stage outlived the
      cap the shadow would have allocated.
    * Vehicles stranded by a wrongful gap-out: the termination happened while
      the shadow still saw a headway below the gap threshold, and the trace
      carries how many ground-truth vehicles were within that window.
    """
    labels = layout.sg_labels
    late = {sg: 0 for sg in labels}
    early = {sg: 0 for sg in labels}
    loss = {sg: 0.0 for sg in labels}
    gain = {sg: 0.0 for sg in labels}
    delayed = {sg: 0 for sg in labels}
    switch_div = 0
    wrongful = 0

    green_gapout_elapsed: float | None = None  # shadow gap-out in current green

    for row in trace:
        kind = row["kind"]
        if kind == "activate":
            green_gapout_elapsed = None
            continue
        if kind not in ("extend", "terminate", "rest"):
            continue
        checked = _as_bool(row.get("checked_gap"))
        shadow_extend = _as_bool(row.get("extend_shadow"))
        if checked and shadow_extend is False and green_gapout_elapsed is None:
            green_gapout_elapsed = _as_float(row["green_elapsed"])
        if kind != "terminate":
            continue

        t = _as_float(row["t"])
        in_window = t_min <= t < t_max
        elapsed = _as_float(row["green_elapsed"])
        stage = _as_int(row["stage"])
        chosen = _as_int(row["chosen_actual"])
        shadow_chosen = _as_int(row["chosen_shadow"])
        cap_actual = _as_float(row["max_green_actual"])
        cap_shadow = _as_float(row["max_green_shadow"])

        if in_window and shadow_chosen is not None and shadow_chosen != chosen:
            switch_div += 1
            actual_sgs = set(layout.stages[chosen])
            shadow_sgs = set(layout.stages[shadow_chosen])
            for sg in shadow_sgs - actual_sgs:
                late[sg] += 1
            for sg in actual_sgs - shadow_sgs:
                early[sg] += 1

        if in_window and cap_shadow is not None:
            if (row["reason"] == "max" and shadow_extend is True
                    and cap_actual < cap_shadow):
                until_gapout = (green_gapout_elapsed if green_gapout_elapsed is not None
                                else math.inf)
                amount = max(0.0, min(cap_shadow, until_gapout) - elapsed)
                for sg in layout.stages[stage]:
                    loss[sg] += amount
            if elapsed > cap_shadow:
                for sg in layout.stages[stage]:
                    gain[sg] += elapsed - cap_shadow

        if in_window and row["reason"] == "gap" and shadow_extend is True:
            wrongful += 1
            cand = row.get("delayed_candidates") or ""
            for part in cand.split(";"):
                if not part:
                    continue
                sg, n = part.split(":")
                delayed[sg] += int(n)

        green_gapout_elapsed = None

    return {
        "switch_divergences": switch_div,
        "wrongful_terminations": wrongful,
        "late": late,
        "early": early,
        "late_minus_early": {sg: late[sg] - early[sg] for sg in labels},
        "green_loss_s": loss,
        "green_gain_s": gain,
        "delayed_vehicles": delayed,
        "green_loss_total_s": sum(loss.values()),
        "green_gain_total_s": sum(gain.values()),
        "delayed_vehicles_total": sum(delayed.values()),
    }


def read_decisions_csv(path: str) -> list[dict]:
    """Read a decision trace back with the same cell types the engine logs."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            for key in ("checked_gap", "extend_actual", "extend_shadow", "cycle_reset"):
                b = _as_bool(row[key])
                row[key] = b if b is not None else ""
            rows.append(row)
    return rows


# --- experiment-level aggregation -------------------------------------------

SUMMARY_FIELDS = (
    "condition", "environment", "snr_penalty_db", "correction", "replications",
    "mlr_all_mean", "mlr_all_sd", "mlr_west_mean", "mlr_west_sd",
    "mlr_others_mean", "mlr_others_sd",
    "delay_mean_s", "delay_sd_s", "delay_delta_pct", "delay_p_value",
    "switch_divergences", "wrongful_terminations",
    "green_loss_s", "green_gain_s", "delayed_vehicles",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_run_summaries(out_root: str, label: str) -> list[dict]:
    cond_dir = os.path.join(out_root, label)
    reps = sorted(d for d in os.listdir(cond_dir)
                  if os.path.isdir(os.path.join(cond_dir, d)))
    out = []
    for rep in reps:
        with open(os.path.join(cond_dir, rep, "summary.json"), encoding="utf-8") as fh:
            out.append(json.load(fh))
    return out


def aggregate_experiment(out_root: str, conditions, layout: IntersectionLayout,
                         baseline_label: str = "baseline") -> dict[str, str]:
    """Fold per-run summaries into summary.csv plus the per-group delta and
    event CSVs the reporter consumes.  Returns the written paths."""
    labels = [c.label for c in conditions]
    by_label = {c.label: c for c in conditions}
    summaries = {label: load_run_summaries(out_root, label) for label in labels}

    base_means = None
    base_group_means: dict[str, float] = {}
    if baseline_label in summaries:
        base_means = [s["delay"]["mean_s"] for s in summaries[baseline_label]]
        for sg in layout.sg_labels:
            ms = [s["delay"]["per_group"][sg]["mean_s"]
                  for s in summaries[baseline_label] if sg in s["delay"]["per_group"]]
            if ms:
                base_group_means[sg] = sum(ms) / len(ms)

    rows = []
    sg_delay_rows = []
    sg_event_rows = []
    for label in labels:
        cond = by_label[label]
        runs = summaries[label]
        delay_means = [s["delay"]["mean_s"] for s in runs]
        mlr_cols = {}
        for scope in ("all", "west", "others"):
            m, sd = _mean_sd([s["mlr"][scope] for s in runs])
            mlr_cols[scope] = (m, sd)
        d_mean, d_sd = _mean_sd(delay_means)
        delta = None
        pval = None
        if label != baseline_label and base_means and d_mean is not None:
            base_mean = sum(base_means) / len(base_means)
            if base_mean:
                delta = 100.0 * (d_mean - base_mean) / base_mean
            if len(base_means) >= 2 and len(delay_means) >= 2:
                pval = welch_t(base_means, delay_means)
        rows.append({
            "condition": label,
            "environment": cond.environment,
            "snr_penalty_db": cond.snr_penalty_db,
            "correction": cond.correction,
            "replications": len(runs),
            "mlr_all_mean": mlr_cols["all"][0], "mlr_all_sd": mlr_cols["all"][1],
            "mlr_west_mean": mlr_cols["west"][0], "mlr_west_sd": mlr_cols["west"][1],
            "mlr_others_mean": mlr_cols["others"][0], "mlr_others_sd": mlr_cols["others"][1],
            "delay_mean_s": d_mean, "delay_sd_s": d_sd,
            "delay_delta_pct": delta, "delay_p_value": pval,
            "switch_divergences": sum(s["events"]["switch_divergences"] for s in runs),
            "wrongful_terminations": sum(s["events"]["wrongful_terminations"] for s in runs),
            "green_loss_s": sum(s["events"]["green_loss_total_s"] for s in runs),
            "green_gain_s": sum(s["events"]["green_gain_total_s"] for s in runs),
            "delayed_vehicles": sum(s["events"]["delayed_vehicles_total"] for s in runs),
        })
        for sg in layout.sg_labels:
            ms = [s["delay"]["per_group"][sg]["mean_s"]
                  for s in runs if sg in s["delay"]["per_group"]]
            m = sum(ms) / len(ms) if ms else None
            base = base_group_means.get(sg)
            sg_delta = (100.0 * (m - base) / base) if (m is not None and base) else None
            sg_delay_rows.append({
                "condition": label, "signal_group": sg,
                "delay_mean_s": m, "baseline_mean_s": base, "delta_pct": sg_delta,
            })
            sg_event_rows.append({
                "condition": label, "signal_group": sg,
                "late": sum(s["events"]["late"][sg] for s in runs),
                "early": sum(s["events"]["early"][sg] for s in runs),
                "late_minus_early": sum(s["events"]["late_minus_early"][sg] for s in runs),
                "green_loss_s": sum(s["events"]["green_loss_s"][sg] for s in runs),
                "green_gain_s": sum(s["events"]["green_gain_s"][sg] for s in runs),
                "delayed_vehicles": sum(s["events"]["delayed_vehicles"][sg] for s in runs),
            })

    paths = {}
    path = os.path.join(out_root, "summary.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    paths["summary"] = path

    path = os.path.join(out_root, "sg_delays.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fields = ("condition", "signal_group", "delay_mean_s", "baseline_mean_s", "delta_pct")
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in sg_delay_rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    paths["sg_delays"] = path

    path = os.path.join(out_root, "sg_events.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fields = ("condition", "signal_group", "late", "early", "late_minus_early",
                  "green_loss_s", "green_gain_s", "delayed_vehicles")
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in sg_event_rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    paths["sg_events"] = path
    return paths
