"""Scenario defaults, validation, file loading and round-tripping."""

import json

import pytest

from crossflux.scenario import (Condition, ScenarioParseError, ScenarioSchemaError,
                                ScenarioValidationError, condition_by_label,
                                default_case_study, load_scenario, loads_scenario,
                                study_conditions, scenario_from_dict,
                                scenario_to_dict, serialize, validate)


def test_default_demand_matches_case_study():
    s = default_case_study()
    assert s.demand_veh_per_h["south_tr"] == 640.0
    assert s.demand_veh_per_h["north_tr"] == 213.0
    assert s.demand_veh_per_h["north_l"] == 137.0
    assert s.demand_veh_per_h["south_l"] == 160.0
    assert s.demand_veh_per_h["east_tr"] == 648.0
    assert s.demand_veh_per_h["east_l"] == 252.0
    assert s.demand_veh_per_h["west_tr"] == 748.0
    assert s.demand_veh_per_h["west_l"] == 102.0


def test_default_control_values():
    c = default_case_study().control
    assert c.min_green_s == 6.0
    assert c.total_extension_s == 56.0
    assert c.max_gap_s == 3.0
    assert c.interstage_s == 10.0
    assert c.detection_range_m == 300.0


def test_default_channel_values():
    ch = default_case_study().channel
    assert ch.tx_power_dbm == 20.0
    assert ch.noise_dbm == -86.0
    assert ch.asphalt_permittivity == 4.75
    assert ch.rsu_antenna_height_m == 5.897
    assert ch.vehicle_antenna_height_m == 1.895
    assert ch.carrier_freq_hz == 5.9e9
    assert ch.cam_period_s == 1.0
    assert ch.message_length_bytes == 300


def test_default_layout_shape():
    layout = default_case_study().layout
    assert len(layout.signal_groups) == 8
    assert len(layout.stages) == 8
    assert all(len(members) >= 1 for members in layout.stages)
    # every group appears in exactly two stages of the default family
    for g in layout.signal_groups:
        assert len(layout.stages_of(g.label)) == 2


def test_default_passes_validation_and_is_stable():
    assert validate(default_case_study()) == []
    assert default_case_study() == default_case_study()


def test_validate_reports_empty_stage():
    s = default_case_study()
    data = scenario_to_dict(s)
    data["layout"]["stages"][3] = []
    bad = scenario_from_dict(data)
    problems = validate(bad)
    assert any("no signal group" in p for p in problems)


def test_validate_reports_conflicting_stage():
    data = scenario_to_dict(default_case_study())
    data["layout"]["stages"][0] = ["north_tr", "east_tr"]
    problems = validate(scenario_from_dict(data))
    assert any("conflicting movements" in p for p in problems)


def test_validate_reports_bad_control_value():
    data = scenario_to_dict(default_case_study())
    data["control"]["max_gap_s"] = 0.0
    problems = validate(scenario_from_dict(data))
    assert len(problems) == 1 and "max_gap_s" in problems[0]


def test_empty_file_gives_default(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    assert load_scenario(str(p)) == default_case_study()


def test_minimal_override(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"channel": {"snr_threshold_db": 14.5}}))
    s = load_scenario(str(p))
    assert s.channel.snr_threshold_db == 14.5
    base = default_case_study()
    assert s.demand_veh_per_h == base.demand_veh_per_h
    assert s.control == base.control


def test_negative_flow_rejected(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"demand_veh_per_h": {"south_tr": -5}}))
    with pytest.raises(ScenarioValidationError) as e:
        load_scenario(str(p))
    assert any("south_tr" in v for v in e.value.violations)


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"control": {"min_green_sec": 5}}))
    with pytest.raises(ScenarioSchemaError):
        load_scenario(str(p))


def test_wrong_type_rejected(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"control": {"min_green_s": "six"}}))
    with pytest.raises(ScenarioSchemaError):
        load_scenario(str(p))


def test_malformed_file_rejected(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioParseError):
        load_scenario(str(p))


def test_round_trip():
    s = default_case_study()
    assert loads_scenario(serialize(s)) == s
    # and a modified one survives too
    data = scenario_to_dict(s)
    data["channel"]["snr_threshold_db"] = 12.25
    data["traffic"]["saturation_headway_s"] = 1.8
    s2 = scenario_from_dict(data)
    assert loads_scenario(serialize(s2)) == s2


def test_condition_matrix_has_fifteen_cells():
    conds = study_conditions()
    assert len(conds) == 15
    assert len({c.label for c in conds}) == 15
    assert sum(1 for c in conds if c.environment == "baseline") == 1
    assert sum(1 for c in conds if c.correction) == 7


def test_condition_penalty_resolution():
    hom = Condition("homogeneous", 25.0, False)
    assert hom.penalties_by_approach() == {a: 25.0 for a in ("north", "south", "east", "west")}
    het = Condition("heterogeneous", 25.0, False)
    p = het.penalties_by_approach()
    assert p["west"] == 25.0
    assert p["north"] == p["south"] == p["east"] == 0.0
    base = Condition("baseline")
    assert base.lossless
    assert set(base.penalties_by_approach().values()) == {0.0}


def test_condition_label_lookup():
    c = condition_by_label("heterogeneous-30db-corrected")
    assert c.environment == "heterogeneous"
    assert c.snr_penalty_db == 30.0
    assert c.correction is True
    with pytest.raises(KeyError):
        condition_by_label("nonsense")
