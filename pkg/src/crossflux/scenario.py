"""Experiment description: intersection layout, demand, control, channel and
traffic parameters, plus the study's condition matrix.

A Scenario is an immutable value object.  ``default_case_study()`` builds the
four-legged intersection used throughout; ``load_scenario()`` reads a JSON
file that overrides any subset of the defaults (documented in the README).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

APPROACHES = ("north", "south", "east", "west")
MOVEMENTS = ("tr", "l")  # through+right, left

ENVIRONMENTS = ("baseline", "homogeneous", "heterogeneous")
SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Base class for scenario file problems."""


class ScenarioParseError(ScenarioError):
    """The file is not valid JSON."""


class ScenarioSchemaError(ScenarioError):
    """The file has unknown keys or badly typed values."""


class ScenarioValidationError(ScenarioError):
    """The scenario violates an invariant."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class SignalGroup:
    label: str          # e.g. "south_tr"
    approach: str       # one of APPROACHES
    movement: str       # "tr" or "l"
    lanes: int
    link_length_m: float


@dataclass(frozen=True)
class IntersectionLayout:
    approaches: tuple[str, ...]
    signal_groups: tuple[SignalGroup, ...]
    # stage index -> labels of the signal groups that show green together
    stages: tuple[tuple[str, ...], ...]
    # unordered label pairs that must never share a stage
    conflicts: frozenset[frozenset[str]]

    @property
    def sg_labels(self) -> tuple[str, ...]:
        return tuple(g.label for g in self.signal_groups)

    def group(self, label: str) -> SignalGroup:
        for g in self.signal_groups:
            if g.label == label:
                return g
        raise KeyError(label)

    def stages_of(self, label: str) -> tuple[int, ...]:
        return tuple(i for i, members in enumerate(self.stages) if label in members)

    def lanes_of_stage(self, stage: int) -> tuple[tuple[str, int], ...]:
        """All (signal group, lane index) keys whose indication the stage controls."""
        out = []
        for label in self.stages[stage]:
            g = self.group(label)
            out.extend((label, k) for k in range(g.lanes))
        return tuple(out)


@dataclass(frozen=True)
class ControlParams:
    min_green_s: float = 6.0
    total_extension_s: float = 56.0
    max_gap_s: float = 3.0
    interstage_s: float = 10.0
    detection_range_m: float = 300.0


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq_hz: float = 5.9e9
    tx_power_dbm: float = 20.0
    noise_dbm: float = -86.0
    asphalt_permittivity: float = 4.75
    rsu_antenna_height_m: float = 5.897
    vehicle_antenna_height_m: float = 1.895
    snr_threshold_db: float = 10.0
    # Spread (dB) of the per-message receiver sensitivity variation that
    # stands in for fading and interference variability.  Deterministic per
    # message (hash of vehicle id and broadcast index); 0 disables it and
    # leaves a hard threshold.
    sensitivity_sigma_db: float = 18.0
    cam_period_s: float = 1.0
    message_length_bytes: int = 300
    data_rate_bps: float = 6e6
    tx_range_m: float = 400.0


@dataclass(frozen=True)
class TrafficParams:
    free_speed_mps: float = 13.89
    accel_mps2: float = 2.5
    decel_mps2: float = 4.5
    stopped_spacing_m: float = 7.0
    saturation_headway_s: float = 2.0
    sub_step_s: float = 0.1


@dataclass(frozen=True)
class EstimatorParams:
    # Positions of stationary estimates advance at least this fast while their
    # signal group is green, so remembered queues discharge instead of
    # blocking gap-out forever.  0 disables the floor.
    green_discharge_mps: float = 3.5
    # Optional age cap for estimated reports, in control steps.  None = keep
    # estimates until they cross and are dropped.
    max_report_age_steps: int | None = None


@dataclass(frozen=True)
class RunWindow:
    warmup_s: float = 600.0
    evaluation_s: float = 1800.0


@dataclass(frozen=True)
class Condition:
    """One cell of the experiment matrix."""

    environment: str            # baseline | homogeneous | heterogeneous
    snr_penalty_db: float = 0.0
    correction: bool = False

    @property
    def label(self) -> str:
        if self.environment == "baseline":
            return "baseline"
        corr = "corrected" if self.correction else "uncorrected"
        return f"{self.environment}-{int(round(self.snr_penalty_db)):02d}db-{corr}"

    def penalties_by_approach(self, approaches=APPROACHES) -> dict[str, float]:
        """Effective SNR penalty per approach antenna."""
        if self.environment == "baseline" or self.environment == "homogeneous":
            p = 0.0 if self.environment == "baseline" else self.snr_penalty_db
            return {a: p for a in approaches}
        # heterogeneous: the west approach alone is degraded
        return {a: (self.snr_penalty_db if a == "west" else 0.0) for a in approaches}

    @property
    def lossless(self) -> bool:
        return self.environment == "baseline"


def study_conditions() -> tuple[Condition, ...]:
    """The 15-cell matrix: baseline, homogeneous 0/20/25/30 dB and
    heterogeneous 20/25/30 dB, each with correction off and on."""
    cells = [Condition("baseline")]
    for corr in (False, True):
        cells.append(Condition("homogeneous", 0.0, corr))
    for env in ("homogeneous", "heterogeneous"):
        for p in (20.0, 25.0, 30.0):
            for corr in (False, True):
                cells.append(Condition(env, p, corr))
    return tuple(cells)


def condition_by_label(label: str) -> Condition:
    for c in study_conditions():
        if c.label == label:
            return c
    raise KeyError(label)


@dataclass(frozen=True)
class Scenario:
    layout: IntersectionLayout
    demand_veh_per_h: dict[str, float]
    control: ControlParams = ControlParams()
    channel: ChannelParams = ChannelParams()
    traffic: TrafficParams = TrafficParams()
    estimator: EstimatorParams = EstimatorParams()
    run: RunWindow = RunWindow()
    schema_version: int = SCHEMA_VERSION

    def with_threshold(self, snr_threshold_db: float) -> "Scenario":
        return replace(self, channel=replace(self.channel, snr_threshold_db=snr_threshold_db))


# --- defaults -------------------------------------------------------------

# Case-study demand, veh/h per signal group.
_DEFAULT_DEMAND = {
    "north_tr": 213.0,
    "north_l": 137.0,
    "south_tr": 640.0,
    "south_l": 160.0,
    "east_tr": 648.0,
    "east_l": 252.0,
    "west_tr": 748.0,
    "west_l": 102.0,
}

# Standard 8-stage family for a 4-leg intersection with protected lefts:
# opposing pairs plus per-approach splits.
_DEFAULT_STAGES = (
    ("north_tr", "south_tr"),
    ("north_l", "south_l"),
    ("east_tr", "west_tr"),
    ("east_l", "west_l"),
    ("north_tr", "north_l"),
    ("south_tr", "south_l"),
    ("east_tr", "east_l"),
    ("west_tr", "west_l"),
)


def _default_conflicts(sg_labels, stages) -> frozenset[frozenset[str]]:
    """Every pair that is not one of the canonical compatible stage pairs."""
    compatible = {frozenset(members) for members in stages}
    out = set()
    labels = list(sg_labels)
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            if frozenset((a, b)) not in compatible:
                out.add(frozenset((a, b)))
    return frozenset(out)


def default_layout(lanes_per_group: int = 2, link_length_m: float = 400.0) -> IntersectionLayout:
    groups = tuple(
        SignalGroup(f"{a}_{m}", a, m, lanes_per_group, link_length_m)
        for a in APPROACHES
        for m in MOVEMENTS
    )
    labels = tuple(g.label for g in groups)
    return IntersectionLayout(
        approaches=APPROACHES,
        signal_groups=groups,
        stages=_DEFAULT_STAGES,
        conflicts=_default_conflicts(labels, _DEFAULT_STAGES),
    )


def default_case_study() -> Scenario:
    """The four-legged case-study intersection: 8 signal groups, 8 stages,
    unbalanced demand, and a 10 min warm-up + 30 min evaluation window."""
    return Scenario(layout=default_layout(), demand_veh_per_h=dict(_DEFAULT_DEMAND))


# --- validation -----------------------------------------------------------

def _positive(violations, name, value, strict=True):
    ok = value > 0 if strict else value >= 0
    if not ok:
        op = ">" if strict else ">="
        violations.append(f"{name} must be {op} 0, got {value}")


def validate(s: Scenario) -> list[str]:
    """Return all invariant violations ([] when the scenario is sound)."""
    v: list[str] = []
    layout = s.layout
    labels = layout.sg_labels

    if len(set(labels)) != len(labels):
        v.append("layout.signal_groups: duplicate labels")
    for g in layout.signal_groups:
        if g.approach not in layout.approaches:
            v.append(f"signal_groups[{g.label}].approach: unknown approach {g.approach!r}")
        if g.lanes < 1:
            v.append(f"signal_groups[{g.label}].lanes must be >= 1, got {g.lanes}")
        if g.link_length_m <= 0:
            v.append(f"signal_groups[{g.label}].link_length_m must be > 0")

    for i, members in enumerate(layout.stages):
        if len(members) == 0:
            v.append(f"stages[{i}]: stage contains no signal group")
        for label in members:
            if label not in labels:
                v.append(f"stages[{i}]: unknown signal group {label!r}")
        for j, a in enumerate(members):
            for b in members[j + 1:]:
                if frozenset((a, b)) in layout.conflicts:
                    v.append(f"stages[{i}]: conflicting movements {a}/{b} share a stage")
    for label in labels:
        if not any(label in members for members in layout.stages):
            v.append(f"signal group {label} belongs to no stage")

    for label in labels:
        if label not in s.demand_veh_per_h:
            v.append(f"demand_veh_per_h: missing entry for {label}")
    for label, flow in s.demand_veh_per_h.items():
        if label not in labels:
            v.append(f"demand_veh_per_h: unknown signal group {label!r}")
        elif flow < 0:
            v.append(f"demand_veh_per_h[{label}] must be >= 0, got {flow}")

    c = s.control
    _positive(v, "control.min_green_s", c.min_green_s)
    _positive(v, "control.total_extension_s", c.total_extension_s, strict=False)
    _positive(v, "control.max_gap_s", c.max_gap_s)
    _positive(v, "control.interstage_s", c.interstage_s, strict=False)
    _positive(v, "control.detection_range_m", c.detection_range_m)

    ch = s.channel
    _positive(v, "channel.carrier_freq_hz", ch.carrier_freq_hz)
    _positive(v, "channel.rsu_antenna_height_m", ch.rsu_antenna_height_m)
    _positive(v, "channel.vehicle_antenna_height_m", ch.vehicle_antenna_height_m)
    if ch.asphalt_permittivity <= 1.0:
        v.append(f"channel.asphalt_permittivity must be > 1, got {ch.asphalt_permittivity}")
    if ch.sensitivity_sigma_db < 0:
        v.append("channel.sensitivity_sigma_db must be >= 0")
    _positive(v, "channel.cam_period_s", ch.cam_period_s)
    _positive(v, "channel.tx_range_m", ch.tx_range_m)
    if ch.message_length_bytes <= 0:
        v.append("channel.message_length_bytes must be > 0")

    t = s.traffic
    _positive(v, "traffic.free_speed_mps", t.free_speed_mps)
    _positive(v, "traffic.accel_mps2", t.accel_mps2)
    _positive(v, "traffic.decel_mps2", t.decel_mps2)
    _positive(v, "traffic.stopped_spacing_m", t.stopped_spacing_m)
    _positive(v, "traffic.saturation_headway_s", t.saturation_headway_s)
    if not (0 < t.sub_step_s <= 1.0):
        v.append(f"traffic.sub_step_s must be in (0, 1], got {t.sub_step_s}")

    if s.estimator.green_discharge_mps < 0:
        v.append("estimator.green_discharge_mps must be >= 0")
    if s.estimator.max_report_age_steps is not None and s.estimator.max_report_age_steps < 1:
        v.append("estimator.max_report_age_steps must be >= 1 when set")

    _positive(v, "run.warmup_s", s.run.warmup_s)
    _positive(v, "run.evaluation_s", s.run.evaluation_s)
    return v


# --- (de)serialization ----------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema_version": s.schema_version,
        "demand_veh_per_h": dict(s.demand_veh_per_h),
        "control": {
            "min_green_s": s.control.min_green_s,
            "total_extension_s": s.control.total_extension_s,
            "max_gap_s": s.control.max_gap_s,
            "interstage_s": s.control.interstage_s,
            "detection_range_m": s.control.detection_range_m,
        },
        "channel": {
            "carrier_freq_hz": s.channel.carrier_freq_hz,
            "tx_power_dbm": s.channel.tx_power_dbm,
            "noise_dbm": s.channel.noise_dbm,
            "asphalt_permittivity": s.channel.asphalt_permittivity,
            "rsu_antenna_height_m": s.channel.rsu_antenna_height_m,
            "vehicle_antenna_height_m": s.channel.vehicle_antenna_height_m,
            "snr_threshold_db": s.channel.snr_threshold_db,
            "sensitivity_sigma_db": s.channel.sensitivity_sigma_db,
            "cam_period_s": s.channel.cam_period_s,
            "message_length_bytes": s.channel.message_length_bytes,
            "data_rate_bps": s.channel.data_rate_bps,
            "tx_range_m": s.channel.tx_range_m,
        },
        "traffic": {
            "free_speed_mps": s.traffic.free_speed_mps,
            "accel_mps2": s.traffic.accel_mps2,
            "decel_mps2": s.traffic.decel_mps2,
            "stopped_spacing_m": s.traffic.stopped_spacing_m,
            "saturation_headway_s": s.traffic.saturation_headway_s,
            "sub_step_s": s.traffic.sub_step_s,
        },
        "estimator": {
            "green_discharge_mps": s.estimator.green_discharge_mps,
            "max_report_age_steps": s.estimator.max_report_age_steps,
        },
        "run": {
            "warmup_s": s.run.warmup_s,
            "evaluation_s": s.run.evaluation_s,
        },
        "layout": {
            "approaches": list(s.layout.approaches),
            "signal_groups": [
                {
                    "label": g.label,
                    "approach": g.approach,
                    "movement": g.movement,
                    "lanes": g.lanes,
                    "link_length_m": g.link_length_m,
                }
                for g in s.layout.signal_groups
            ],
            "stages": [list(members) for members in s.layout.stages],
            "conflicts": sorted(sorted(pair) for pair in s.layout.conflicts),
        },
    }


def serialize(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n"


def _check_keys(d: dict, allowed: set[str], where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioSchemaError(f"{where}: unknown key(s) {sorted(unknown)}")


def _num(d: dict, key: str, where: str) -> float:
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioSchemaError(f"{where}.{key}: expected a number, got {val!r}")
    return float(val)


def _merge_section(defaults: dict, override: dict, where: str,
                   int_keys=(), nullable_keys=()) -> dict:
    _check_keys(override, set(defaults), where)
    merged = dict(defaults)
    for key, val in override.items():
        if val is None and key in nullable_keys:
            merged[key] = None
        elif key in int_keys:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ScenarioSchemaError(f"{where}.{key}: expected an integer, got {val!r}")
            merged[key] = val
        else:
            merged[key] = _num(override, key, where)
    return merged


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioSchemaError(f"top level: expected an object, got {type(data).__name__}")
    top_allowed = {"schema_version", "demand_veh_per_h", "control", "channel",
                   "traffic", "estimator", "run", "layout"}
    _check_keys(data, top_allowed, "top level")

    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioSchemaError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")

    base = default_case_study()
    defaults = scenario_to_dict(base)

    layout = base.layout
    if "layout" in data:
        ldata = data["layout"]
        _check_keys(ldata, {"approaches", "signal_groups", "stages", "conflicts"}, "layout")
        approaches = tuple(ldata.get("approaches", defaults["layout"]["approaches"]))
        if "signal_groups" in ldata:
            groups = []
            for i, gd in enumerate(ldata["signal_groups"]):
                where = f"layout.signal_groups[{i}]"
                _check_keys(gd, {"label", "approach", "movement", "lanes", "link_length_m"}, where)
                try:
                    groups.append(SignalGroup(
                        label=str(gd["label"]),
                        approach=str(gd["approach"]),
                        movement=str(gd["movement"]),
                        lanes=int(gd["lanes"]),
                        link_length_m=_num(gd, "link_length_m", where),
                    ))
                except KeyError as e:
                    raise ScenarioSchemaError(f"{where}: missing key {e}") from None
            groups = tuple(groups)
        else:
            groups = layout.signal_groups
        stages = tuple(tuple(m) for m in ldata.get("stages", defaults["layout"]["stages"]))
        if "conflicts" in ldata:
            conflicts = frozenset(frozenset(pair) for pair in ldata["conflicts"])
        elif "signal_groups" in ldata or "stages" in ldata:
            conflicts = _default_conflicts(tuple(g.label for g in groups), stages)
        else:
            conflicts = layout.conflicts
        layout = IntersectionLayout(approaches, groups, stages, conflicts)

    layout_labels = [g.label for g in layout.signal_groups]
    if set(layout_labels) == set(defaults["demand_veh_per_h"]):
        demand = dict(defaults["demand_veh_per_h"])
    else:
        demand = {label: 0.0 for label in layout_labels}
    if "demand_veh_per_h" in data:
        for label in data["demand_veh_per_h"]:
            demand[label] = _num(data["demand_veh_per_h"], label, "demand_veh_per_h")

    control = _merge_section(defaults["control"], data.get("control", {}), "control")
    channel = _merge_section(defaults["channel"], data.get("channel", {}), "channel",
                             int_keys=("message_length_bytes",))
    traffic = _merge_section(defaults["traffic"], data.get("traffic", {}), "traffic")
    estim = _merge_section(defaults["estimator"], data.get("estimator", {}), "estimator",
                           int_keys=("max_report_age_steps",),
                           nullable_keys=("max_report_age_steps",))
    runw = _merge_section(defaults["run"], data.get("run", {}), "run")

    return Scenario(
        layout=layout,
        demand_veh_per_h=demand,
        control=ControlParams(**control),
        channel=ChannelParams(**{k: (int(v) if k == "message_length_bytes" else v)
                                 for k, v in channel.items()}),
        traffic=TrafficParams(**traffic),
        estimator=EstimatorParams(**estim),
        run=RunWindow(**runw),
        schema_version=SCHEMA_VERSION,
    )


def load_scenario(path: str) -> Scenario:
    """Load a scenario file, apply defaults, and validate."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.strip() == "":
        data = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScenarioParseError(f"{path}: {e}") from None
    s = scenario_from_dict(data)
    violations = validate(s)
    if violations:
        raise ScenarioValidationError(violations)
    return s


def loads_scenario(text: str) -> Scenario:
    """Like load_scenario but from a string (used by round-trip tests)."""
    data = json.loads(text) if text.strip() else {}
    s = scenario_from_dict(data)
    violations = validate(s)
    if violations:
        raise ScenarioValidationError(violations)
    return s
