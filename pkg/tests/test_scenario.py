import json

import pytest

from loramesh.channel import LinkModel
from loramesh.scenario import (
    NodeSpec,
    Scenario,
    ScenarioError,
    Topology,
    TrafficSpec,
    bundled_scenario_names,
    load_scenario,
    scenario_from_dict,
    topology_from_dict,
)


def minimal_dict(**overrides):
    data = {
        "name": "test",
        "topology": {
            "nodes": [
                {"uid": 0, "role": "gateway"},
                {"uid": 1, "role": "repeater"},
                {"uid": 101, "role": "end_device", "attach": 1},
            ],
            "links": [
                {"a": 0, "b": 1, "distance_m": 50.0},
                {"a": 101, "b": 1, "distance_m": 10.0},
            ],
        },
        "traffic": {"total_packets": 5},
    }
    data.update(overrides)
    return data


def test_minimal_scenario_loads_with_defaults():
    scn = scenario_from_dict(minimal_dict())
    assert scn.radio.spreading_factor == 7
    assert scn.radio.bandwidth_hz == 500_000
    assert scn.energy.battery_capacity_mah == 100.0
    assert scn.traffic.mean_interval_s == 2.0
    assert scn.mac.wait_min_s == 0.010
    assert scn.mac.wait_max_s == 0.100
    assert scn.phases.beacon_end_s == 30.0
    assert scn.protocol == "routing"
    assert scn.seed == 1
    assert scn.horizon_s is None
    assert scn.standby_enabled is True


def test_topology_requires_gateway():
    with pytest.raises(ScenarioError, match="no gateway"):
        Topology([NodeSpec(1, "repeater")], LinkModel())


def test_end_device_must_attach_to_repeater():
    with pytest.raises(ScenarioError, match="attach"):
        Topology([NodeSpec(0, "gateway"), NodeSpec(101, "end_device")], LinkModel())
    with pytest.raises(ScenarioError, match="not a repeater"):
        Topology(
            [NodeSpec(0, "gateway"), NodeSpec(101, "end_device", attach=0)],
            LinkModel(),
        )


def test_only_end_devices_attach():
    with pytest.raises(ScenarioError, match="only end devices"):
        Topology(
            [NodeSpec(0, "gateway"), NodeSpec(1, "repeater", attach=0)],
            LinkModel(),
        )


def test_link_to_unknown_node_rejected():
    links = LinkModel()
    links.add_link(0, 9, 10.0)
    with pytest.raises(ScenarioError, match="unknown node"):
        Topology([NodeSpec(0, "gateway")], links)


def test_duplicate_uid_rejected():
    with pytest.raises(ScenarioError, match="duplicate"):
        Topology([NodeSpec(0, "gateway"), NodeSpec(0, "repeater")], LinkModel())


def test_unknown_role_rejected():
    with pytest.raises(ScenarioError, match="unknown role"):
        Topology([NodeSpec(0, "gateway"), NodeSpec(1, "sensor")], LinkModel())


def test_unknown_protocol_rejected():
    with pytest.raises(ScenarioError, match="protocol"):
        scenario_from_dict(minimal_dict(protocol="carrier-pigeon"))


def test_traffic_needs_end_devices():
    data = minimal_dict()
    data["topology"]["nodes"] = data["topology"]["nodes"][:2]
    data["topology"]["links"] = data["topology"]["links"][:1]
    with pytest.raises(ScenarioError, match="no end devices"):
        scenario_from_dict(data)


def test_traffic_spec_validation():
    with pytest.raises(ScenarioError):
        TrafficSpec(payload_bytes=0)
    with pytest.raises(ScenarioError):
        TrafficSpec(payload_bytes=256)
    with pytest.raises(ScenarioError):
        TrafficSpec(total_packets=-1)
    with pytest.raises(ScenarioError):
        TrafficSpec(total_packets=10, mean_interval_s=0.0)


def test_phase_windows_must_increase():
    with pytest.raises(ScenarioError, match="increasing"):
        scenario_from_dict(
            minimal_dict(phases={"beacon_end_s": 120.0, "report_end_s": 30.0})
        )


def test_inverted_mac_window_rejected():
    with pytest.raises(ScenarioError, match="inverted"):
        scenario_from_dict(
            minimal_dict(mac={"wait_min_s": 0.2, "wait_max_s": 0.1})
        )


def test_negative_horizon_rejected():
    with pytest.raises(ScenarioError, match="horizon"):
        scenario_from_dict(minimal_dict(horizon_s=-5.0))


def test_schedule_parses_uid_keys_and_times():
    scn = scenario_from_dict(
        minimal_dict(traffic={"schedule": {"101": [1.0, 2.5]}})
    )
    assert scn.traffic.schedule == {101: (1.0, 2.5)}


def test_topology_file_resolves_relative_to_scenario(tmp_path):
    topo = minimal_dict()["topology"]
    (tmp_path / "topo.json").write_text(json.dumps(topo))
    scenario_path = tmp_path / "scn.json"
    scenario_path.write_text(
        json.dumps({"name": "split", "topology_file": "topo.json"})
    )
    scn = load_scenario(scenario_path)
    assert scn.name == "split"
    assert scn.topology.links.distance(0, 1) == 50.0


def test_load_scenario_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(path)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    with pytest.raises(ScenarioError, match="bundled"):
        load_scenario("no_such_bundle")


def test_bundled_scenarios_present_and_loadable():
    names = bundled_scenario_names()
    for expected in ("representative", "standby_recovery", "two_ed_battery"):
        assert expected in names
        scn = load_scenario(expected)
        assert scn.topology.gateways


def test_per_role_capacity_overrides():
    scn = load_scenario("two_ed_battery")
    assert scn.energy.battery_capacity_mah == 12.0
    assert scn.gateway_capacity_mah == 10000.0
    assert scn.ed_capacity_mah == 10000.0


def test_malformed_node_and_link_entries():
    data = minimal_dict()
    data["topology"]["nodes"].append({"role": "repeater"})
    with pytest.raises(ScenarioError, match="malformed node"):
        scenario_from_dict(data)
    data = minimal_dict()
    data["topology"]["links"].append({"a": 0})
    with pytest.raises(ScenarioError, match="malformed link"):
        scenario_from_dict(data)


def test_topology_needs_nodes_and_links_keys():
    with pytest.raises(ScenarioError, match="nodes"):
        topology_from_dict({"links": []})
    with pytest.raises(ScenarioError, match="links"):
        topology_from_dict({"nodes": [{"uid": 0, "role": "gateway"}]})
