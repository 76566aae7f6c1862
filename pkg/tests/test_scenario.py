from __future__ import annotations

import numpy as np
import pytest

from sharedflock.scenario import (FLIGHT_ALTITUDE, Scenario, ScenarioError,
                                  load_scenario, load_scenario_file)

MINIMAL = """
agents:
  - [0.0, 0.0]
  - [1.5, 0.0]
goal: [5.0, 0.0]
"""


def test_minimal_scenario_gets_defaults():
    sc = load_scenario(MINIMAL)
    assert sc.mode == "shared"
    assert sc.obstacles == []
    assert sc.operator_script == []
    assert sc.sim.dt == 0.02
    assert sc.planner.rho_usr == 35.0
    assert sc.flocking.d_ref == 1.5
    assert sc.repulsion.f_s == 25.0
    np.testing.assert_allclose(sc.goal, [5.0, 0.0, FLIGHT_ALTITUDE])


def test_missing_required_keys():
    with pytest.raises(ScenarioError, match="agents"):
        load_scenario("goal: [1, 2, 3]")
    with pytest.raises(ScenarioError, match="goal"):
        load_scenario("agents: [[0, 0]]")


def test_unknown_top_level_key_is_named():
    with pytest.raises(ScenarioError, match="unknown key 'agnts'"):
        load_scenario(MINIMAL + "\nagnts: []")


def test_unknown_param_key_is_named_with_section():
    doc = MINIMAL + """
params:
  planner:
    rho_user: 10.0
"""
    with pytest.raises(ScenarioError, match=r"params\.planner.*rho_user"):
        load_scenario(doc)


def test_two_component_positions_get_flight_altitude():
    sc = load_scenario(MINIMAL)
    for _, start in sc.agent_starts:
        assert start[2] == FLIGHT_ALTITUDE
    sc2 = load_scenario("agents: [[0, 0, 2.5]]\ngoal: [5, 0, 2.5]")
    assert sc2.agent_starts[0][1][2] == 2.5


def test_agents_accept_explicit_ids_and_sort():
    doc = """
agents:
  - {id: 7, position: [1.5, 0.0]}
  - {id: 2, position: [0.0, 0.0]}
goal: [5.0, 0.0]
"""
    sc = load_scenario(doc)
    assert [aid for aid, _ in sc.agent_starts] == [2, 7]


def test_duplicate_agent_ids_rejected():
    doc = """
agents:
  - {id: 1, position: [0.0, 0.0]}
  - {id: 1, position: [2.0, 0.0]}
goal: [5.0, 0.0]
"""
    with pytest.raises(ScenarioError, match="duplicate agent ids"):
        load_scenario(doc)


def test_shared_start_positions_rejected():
    doc = "agents: [[0, 0], [0, 0]]\ngoal: [5, 0]"
    with pytest.raises(ScenarioError, match="share a start position"):
        load_scenario(doc)


def test_agent_id_must_be_integer():
    doc = "agents: [{id: true, position: [0, 0]}]\ngoal: [5, 0]"
    with pytest.raises(ScenarioError, match="expected an integer"):
        load_scenario(doc)


def test_mode_validation():
    assert load_scenario(MINIMAL + "\nmode: baseline").mode == "baseline"
    with pytest.raises(ScenarioError, match="mode"):
        load_scenario(MINIMAL + "\nmode: manual")


def test_operator_script_parses_and_validates():
    doc = MINIMAL + """
operator_script:
  - {t: 1.0, position: [0.0, 0.0]}
  - {t: 3.0, position: [1.0, 1.0, 1.2]}
"""
    sc = load_scenario(doc)
    assert len(sc.operator_script) == 2
    t0, p0 = sc.operator_script[0]
    assert t0 == 1.0
    np.testing.assert_allclose(p0, [0.0, 0.0, FLIGHT_ALTITUDE])


def test_operator_script_times_must_increase():
    doc = MINIMAL + """
operator_script:
  - {t: 2.0, position: [0.0, 0.0]}
  - {t: 2.0, position: [1.0, 0.0]}
"""
    with pytest.raises(ScenarioError, match="strictly increase"):
        load_scenario(doc)
    with pytest.raises(ScenarioError, match="non-negative"):
        load_scenario(MINIMAL + "\noperator_script: [{t: -1.0, position: [0, 0]}]")


def test_param_overrides_reach_modules():
    doc = MINIMAL + """
params:
  planner: {rho_usr: 10.0, depth_max: 4}
  repulsion: {f_s: 1.5}
  admittance: {stiffness: [8.0, 4.0, 8.0], force_sign: -1}
  sim: {dt: 0.01}
"""
    sc = load_scenario(doc)
    assert sc.planner.rho_usr == 10.0
    assert sc.planner.depth_max == 4
    assert isinstance(sc.planner.depth_max, int)
    assert sc.repulsion.f_s == 1.5
    np.testing.assert_allclose(sc.admittance.stiffness, [8.0, 4.0, 8.0])
    assert sc.admittance.force_sign == -1.0
    assert sc.sim.dt == 0.01


def test_param_validation_errors_carry_section():
    with pytest.raises(ScenarioError, match=r"params\.planner"):
        load_scenario(MINIMAL + "\nparams: {planner: {tau: 0.0}}")
    with pytest.raises(ScenarioError, match="expected a number"):
        load_scenario(MINIMAL + "\nparams: {sim: {dt: fast}}")


def test_obstacles_build_truth_map():
    doc = """
agents: [[0, 0]]
goal: [5, 0]
obstacles:
  - {min: [2.0, -1.0, 0.0], max: [2.4, 1.0, 2.0]}
"""
    sc = load_scenario(doc)
    truth = sc.truth_map()
    assert len(truth.occupied) > 0
    centers = truth.occupied_centers()
    assert centers[:, 0].min() >= 2.0
    assert centers[:, 0].max() <= 2.4


def test_obstacle_box_validation():
    base = "agents: [[0, 0]]\ngoal: [5, 0]\n"
    with pytest.raises(ScenarioError, match="min corner exceeds"):
        load_scenario(base + "obstacles: [{min: [3, 0, 0], max: [2, 1, 1]}]")
    with pytest.raises(ScenarioError, match="needs 'min' and 'max'"):
        load_scenario(base + "obstacles: [{min: [0, 0, 0]}]")
    with pytest.raises(ScenarioError, match=r"expected \[x, y, z\]"):
        load_scenario(base + "obstacles: [{min: [0, 0], max: [1, 1, 1]}]")


def test_start_in_collision_rejected():
    doc = """
agents: [[2.1, 0.0]]
goal: [5, 0]
obstacles:
  - {min: [2.0, -0.2, 0.8], max: [2.4, 0.2, 1.2]}
"""
    with pytest.raises(ScenarioError, match="in collision"):
        load_scenario(doc)


def test_invalid_yaml_reported():
    with pytest.raises(ScenarioError, match="not valid YAML"):
        load_scenario("agents: [[0, 0]\ngoal: [")
    with pytest.raises(ScenarioError, match="expected a mapping"):
        load_scenario("- just\n- a\n- list")


def test_boolean_is_not_a_number():
    with pytest.raises(ScenarioError, match="expected a number"):
        load_scenario("agents: [[true, 0]]\ngoal: [5, 0]")


def test_non_finite_numbers_rejected():
    with pytest.raises(ScenarioError, match="finite"):
        load_scenario("agents: [[.nan, 0]]\ngoal: [5, 0]")


def test_load_scenario_file(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(MINIMAL, encoding="utf-8")
    sc = load_scenario_file(str(path))
    assert isinstance(sc, Scenario)
    assert len(sc.agent_starts) == 2
