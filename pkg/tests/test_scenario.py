"""Scenario parsing: strict keys, value checks, and the bundled presets."""

import pytest

from meshmac.errors import ParseError, ValidationError
from meshmac.scenario import (
    Scenario,
    list_presets,
    load_preset,
    load_scenario,
    scenario_from_dict,
)


def minimal_doc(**over):
    doc = {
        "modes": ["csma"],
        "node_counts": [10],
        "source_rates": [1.0],
        "duration_s": 5.0,
        "seeds": [1],
        "target_hidden": [0.2],
    }
    doc.update(over)
    return doc


# ------------------------------------------------------------------ parsing

def test_minimal_scenario_parses():
    sc = scenario_from_dict(minimal_doc(), default_name="mini")
    assert sc.name == "mini"
    assert sc.modes == ("csma",)
    assert sc.hidden_axis == (("target", 0.2),)
    assert sc.engine.queue_cap == 64  # defaults fill the rest
    assert sc.csma.c_nb == 5
    assert sc.tsch.channels == 16
    assert sc.hybrid.margin == 1.5


def test_radius_axis():
    doc = minimal_doc()
    del doc["target_hidden"]
    doc["comm_radius"] = [15.0, 20]
    sc = scenario_from_dict(doc)
    assert sc.hidden_axis == (("radius", 15.0), ("radius", 20.0))


def test_exactly_one_range_axis():
    doc = minimal_doc(comm_radius=[15.0])
    with pytest.raises(ValidationError, match="exactly one"):
        scenario_from_dict(doc)
    doc = minimal_doc()
    del doc["target_hidden"]
    with pytest.raises(ValidationError, match="exactly one"):
        scenario_from_dict(doc)


def test_unknown_top_level_key_is_named():
    with pytest.raises(ValidationError, match="'durations'"):
        scenario_from_dict(minimal_doc(durations=[5.0]))


def test_unknown_section_key_is_named():
    with pytest.raises(ValidationError, match="csma.max_attempt"):
        scenario_from_dict(minimal_doc(csma={"max_attempt": 3}))


def test_missing_required_key():
    doc = minimal_doc()
    del doc["seeds"]
    with pytest.raises(ValidationError, match="'seeds'"):
        scenario_from_dict(doc)


def test_type_errors_are_rejected():
    with pytest.raises(ValidationError, match="node_counts"):
        scenario_from_dict(minimal_doc(node_counts=[10.5]))
    with pytest.raises(ValidationError, match="expected an integer"):
        scenario_from_dict(minimal_doc(seeds=[True]))
    with pytest.raises(ValidationError, match="non-empty"):
        scenario_from_dict(minimal_doc(modes=[]))


def test_value_range_checks():
    cases = [
        dict(modes=["csma", "csma"]),
        dict(modes=["aloha"]),
        dict(node_counts=[1]),
        dict(source_rates=[0.0]),
        dict(duration_s=0.0),
        dict(target_hidden=[1.0]),
        dict(hidden_tolerance=0.0),
        dict(area_side=-5.0),
        dict(engine={"warmup_fraction": 1.0}),
        dict(engine={"queue_cap": 0}),
        dict(engine={"hnp_formula": "mystery"}),
        dict(tsch={"channels": 0}),
        dict(tsch={"reserved_slots": -1}),
        dict(hybrid={"margin": 0.0}),
    ]
    for over in cases:
        with pytest.raises(ValidationError):
            scenario_from_dict(minimal_doc(**over))


def test_section_settings_land_in_config():
    sc = scenario_from_dict(minimal_doc(
        csma={"max_attempts": 12},
        engine={"queue_cap": 4096},
        tsch={"sink_radios": 16},
        hybrid={"margin": 1.25},
    ))
    assert sc.csma.to_backoff_params().max_attempts == 12
    assert sc.engine.queue_cap == 4096
    assert sc.tsch.sink_radios == 16
    assert sc.hybrid.margin == 1.25
    group = sc.hybrid.to_backoff_params(sc.csma.txn_duration_us)
    assert (group.c_nb, group.c_be, group.unit_backoff_us) == (0, 1, 250)
    assert group.txn_duration_us == sc.csma.txn_duration_us


# -------------------------------------------------------------------- files

def test_load_scenario_toml(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(
        'modes = ["csma", "tsch"]\n'
        "node_counts = [20]\n"
        "source_rates = [1, 2]\n"
        "duration_s = 5.0\n"
        "seeds = [1, 2]\n"
        "comm_radius = [25.0]\n"
        "[tsch]\n"
        "slotframe_length = 100\n"
    )
    sc = load_scenario(path)
    assert sc.name == "sweep"
    assert sc.source_rates == (1.0, 2.0)
    assert sc.tsch.slotframe_length == 100


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ParseError, match="cannot read"):
        load_scenario(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("modes = [unclosed\n")
    with pytest.raises(ParseError, match="invalid"):
        load_scenario(bad)


# ------------------------------------------------------------------ presets

def test_presets_are_listed():
    names = list_presets()
    assert "rate_sweep_300" in names
    assert "scale_sweep" in names
    assert names == sorted(names)


def test_every_preset_parses():
    for name in list_presets():
        sc = load_preset(name)
        assert isinstance(sc, Scenario)
        assert sc.name == name
        assert sc.modes


def test_unknown_preset_suggests_names():
    with pytest.raises(ParseError, match="rate_sweep_300"):
        load_preset("nope")
