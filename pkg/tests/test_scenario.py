import copy
import json

import pytest

from hss_stab import (
    PhysicalParameterError,
    ScenarioError,
    load_scenario,
    scenario_from_dict,
)
from hss_stab.pipeline import assemble_system
from hss_stab.runner import run_command
from tests.conftest import load_raw, scenario_path


MINIMAL = {
    "grid": {
        "nodes": [{"id": "a", "kind": "forming"}, {"id": "b", "kind": "following"}],
        "branches": [{"from": "a", "to": "b", "r": 0.1, "l": 0.001}],
        "shunts": [{"node": "b", "c": 1e-05}],
    }
}


class TestLoading:
    def test_minimal_defaults(self):
        scenario = scenario_from_dict(copy.deepcopy(MINIMAL))
        assert scenario.hmax == 25
        assert scenario.f1 == 50.0
        assert scenario.ciders == ()

    def test_file_roundtrip(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(MINIMAL))
        scenario = load_scenario(p)
        assert scenario.source == str(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ScenarioError, match="invalid JSON"):
            load_scenario(p)

    def test_schema_violation_names_field(self):
        raw = copy.deepcopy(MINIMAL)
        raw["grid"]["nodes"][0]["kind"] = "slack"
        with pytest.raises(ScenarioError, match="grid.nodes.0.kind"):
            scenario_from_dict(raw)

    def test_unknown_top_level_key(self):
        raw = copy.deepcopy(MINIMAL)
        raw["extra"] = 1
        with pytest.raises(ScenarioError):
            scenario_from_dict(raw)

    def test_unknown_node_reference(self):
        raw = load_raw("two_node")
        raw["ciders"][1]["node"] = "n9"
        with pytest.raises(ScenarioError, match="n9"):
            scenario_from_dict(raw)

    def test_negative_inductance_names_branch(self):
        raw = copy.deepcopy(MINIMAL)
        raw["grid"]["branches"][0]["l"] = -0.001
        with pytest.raises(PhysicalParameterError, match="a-b"):
            scenario_from_dict(raw)

    def test_kind_mismatch(self):
        raw = load_raw("two_node")
        raw["ciders"] = [raw["ciders"][1]]
        raw["ciders"][0]["node"] = "n1"  # power-controlled unit at forming node
        with pytest.raises(ScenarioError, match="cannot sit"):
            scenario_from_dict(raw)

    def test_duplicate_resource(self):
        raw = load_raw("two_node")
        raw["ciders"].append(copy.deepcopy(raw["ciders"][1]))
        with pytest.raises(ScenarioError, match="more than one"):
            scenario_from_dict(raw)

    def test_forming_node_needs_resource(self):
        raw = load_raw("two_node")
        raw["ciders"] = [raw["ciders"][1]]  # drop the voltage-forming unit
        with pytest.raises(ScenarioError, match="forming"):
            scenario_from_dict(raw)

    def test_single_value_sweep_rejected(self):
        raw = copy.deepcopy(MINIMAL)
        raw["sweeps"] = {"bad": {"path": "grid.branches.0.r", "values": [0.1]}}
        with pytest.raises(ScenarioError, match="sweeps.bad.values"):
            scenario_from_dict(raw)

    def test_sweep_path_validated_on_load(self):
        raw = copy.deepcopy(MINIMAL)
        raw["sweeps"] = {"bad": {"path": "grid.branches.3.r", "values": [0.1, 0.2]}}
        with pytest.raises(ScenarioError):
            scenario_from_dict(raw)


class TestParameterPaths:
    def test_resolve(self, two_node):
        assert two_node.resolve_parameter("ciders.0.control.gains.kp") == 0.05
        assert two_node.resolve_parameter("grid.branches.0.r") == 0.1

    def test_resolve_non_scalar_rejected(self, two_node):
        with pytest.raises(ScenarioError, match="numeric scalar"):
            two_node.resolve_parameter("grid.branches.0")

    def test_with_parameter_rebuilds(self, two_node):
        changed = two_node.with_parameter("grid.branches.0.r", 0.3)
        assert changed.resolve_parameter("grid.branches.0.r") == 0.3
        assert two_node.resolve_parameter("grid.branches.0.r") == 0.1  # original intact
        assert changed.topology.branches[0].resistance[0, 0] == 0.3

    def test_with_hmax(self, two_node):
        assert two_node.with_hmax(3).hmax == 3

    def test_missing_segment(self, two_node):
        with pytest.raises(ScenarioError, match="no entry"):
            two_node.resolve_parameter("ciders.0.control.gains.kd")


class TestValidationCompleteness:
    @pytest.mark.parametrize("name", ["two_node", "rlc_grid", "toy_gain"])
    def test_loaded_scenarios_run_eig(self, name):
        scenario = load_scenario(scenario_path(name))
        if name == "two_node":
            scenario = scenario.with_hmax(2)
        results = run_command("eig", scenario)
        assert results.records
        assert results.meta["stable"] is True

    def test_assembled_dimensions(self, two_node):
        system = assemble_system(two_node.with_hmax(1))
        count = 2 * 1 + 1
        per_channel = sum(
            len(c.model.state_names) for c in system.ciders
        ) + len(system.grid_model.state_names)
        assert system.model.state_dim == count * per_channel
