"""Scenario documents: obstacles, agent starts, goal, mode, operator script,
and per-module parameter overrides.

Scenarios are YAML with a closed schema; unknown keys are rejected by name so
typos fail loudly instead of silently running with defaults. Positions may be
given as [x, y] (flight altitude z = 1.0 is filled in) or [x, y, z].
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .admittance import AdmittanceParams
from .core import Vec3, vec3
from .flocking import FlockParams
from .planner import PlannerParams
from .voxels import RepulsionParams, VoxelMap

FLIGHT_ALTITUDE = 1.0  # meters, filled in for 2-D positions

MODES = ("baseline", "shared")


@dataclass
class SimParams:
    dt: float = 0.02
    replan_period: float = 2.0
    duration_max: float = 120.0
    goal_tolerance: float = 0.5
    resolution: float = 0.2      # voxel edge length, m
    k_track_p: float = 4.0       # agent PD tracking of its commanded position
    k_track_d: float = 3.0

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.replan_period <= 0 or self.duration_max <= 0:
            raise ValueError("dt, replan_period and duration_max must be positive")
        if self.goal_tolerance <= 0 or self.resolution <= 0:
            raise ValueError("goal_tolerance and resolution must be positive")


@dataclass
class Box:
    min_corner: Vec3
    max_corner: Vec3


@dataclass
class Scenario:
    obstacles: list[Box] = field(default_factory=list)
    agent_starts: list[tuple[int, Vec3]] = field(default_factory=list)
    goal: Vec3 = field(default_factory=lambda: vec3(0.0, 0.0, FLIGHT_ALTITUDE))
    mode: str = "shared"
    operator_script: list[tuple[float, Vec3]] = field(default_factory=list)
    planner: PlannerParams = field(default_factory=PlannerParams)
    admittance: AdmittanceParams = field(default_factory=AdmittanceParams)
    flocking: FlockParams = field(default_factory=FlockParams)
    repulsion: RepulsionParams = field(default_factory=RepulsionParams)
    sim: SimParams = field(default_factory=SimParams)

    def truth_map(self) -> VoxelMap:
        vmap = VoxelMap(resolution=self.sim.resolution)
        for box in self.obstacles:
            vmap.insert_box(box.min_corner, box.max_corner)
        return vmap


class ScenarioError(ValueError):
    pass


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, allowed: set[str], where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ScenarioError(f"{where}: unknown key '{key}'")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    f = float(value)
    if not np.isfinite(f):
        raise ScenarioError(f"{where}: value must be finite")
    return f


def _position(value, where: str) -> Vec3:
    if not isinstance(value, (list, tuple)) or len(value) not in (2, 3):
        raise ScenarioError(f"{where}: expected [x, y] or [x, y, z]")
    coords = [_number(c, where) for c in value]
    if len(coords) == 2:
        coords.append(FLIGHT_ALTITUDE)
    return np.array(coords, dtype=np.float64)


def _vector3(value, where: str) -> Vec3:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ScenarioError(f"{where}: expected [x, y, z]")
    return np.array([_number(c, where) for c in value], dtype=np.float64)


def _parse_obstacles(raw, where: str) -> list[Box]:
    if not isinstance(raw, list):
        raise ScenarioError(f"{where}: expected a list of boxes")
    boxes = []
    for n, item in enumerate(raw):
        loc = f"{where}[{n}]"
        item = _require_mapping(item, loc)
        _check_keys(item, {"min", "max"}, loc)
        if "min" not in item or "max" not in item:
            raise ScenarioError(f"{loc}: box needs 'min' and 'max' corners")
        lo = _vector3(item["min"], f"{loc}.min")
        hi = _vector3(item["max"], f"{loc}.max")
        if np.any(lo > hi):
            raise ScenarioError(f"{loc}: min corner exceeds max corner")
        boxes.append(Box(lo, hi))
    return boxes


def _parse_agents(raw, where: str) -> list[tuple[int, Vec3]]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(f"{where}: expected a non-empty list")
    starts: list[tuple[int, Vec3]] = []
    for n, item in enumerate(raw):
        loc = f"{where}[{n}]"
        if isinstance(item, dict):
            _check_keys(item, {"id", "position"}, loc)
            if "id" not in item or "position" not in item:
                raise ScenarioError(f"{loc}: agent mapping needs 'id' and 'position'")
            if isinstance(item["id"], bool) or not isinstance(item["id"], int):
                raise ScenarioError(f"{loc}.id: expected an integer")
            starts.append((item["id"], _position(item["position"], f"{loc}.position")))
        else:
            starts.append((n, _position(item, loc)))
    ids = [aid for aid, _ in starts]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"{where}: duplicate agent ids")
    for a in range(len(starts)):
        for b in range(a + 1, len(starts)):
            if np.array_equal(starts[a][1], starts[b][1]):
                raise ScenarioError(
                    f"{where}: agents {starts[a][0]} and {starts[b][0]} share a start position")
    return sorted(starts, key=lambda pair: pair[0])


def _parse_script(raw, where: str) -> list[tuple[float, Vec3]]:
    if not isinstance(raw, list):
        raise ScenarioError(f"{where}: expected a list of waypoints")
    script = []
    for n, item in enumerate(raw):
        loc = f"{where}[{n}]"
        item = _require_mapping(item, loc)
        _check_keys(item, {"t", "position"}, loc)
        if "t" not in item or "position" not in item:
            raise ScenarioError(f"{loc}: waypoint needs 't' and 'position'")
        t = _number(item["t"], f"{loc}.t")
        if t < 0:
            raise ScenarioError(f"{loc}.t: time must be non-negative")
        script.append((t, _position(item["position"], f"{loc}.position")))
    for n in range(1, len(script)):
        if script[n][0] <= script[n - 1][0]:
            raise ScenarioError(f"{where}[{n}].t: waypoint times must strictly increase")
    return script


def _build_params(cls, raw, where: str):
    raw = _require_mapping(raw, where)
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(raw, names, where)
    kwargs = {}
    for key, value in raw.items():
        loc = f"{where}.{key}"
        if key == "force_sign":
            kwargs[key] = _number(value, loc)
        elif isinstance(value, (list, tuple)):
            kwargs[key] = [_number(v, loc) for v in value]
        elif isinstance(value, bool) or isinstance(value, (int, float)):
            kwargs[key] = _number(value, loc)
            if key in ("control_levels", "depth_max", "max_expansions"):
                kwargs[key] = int(kwargs[key])
        else:
            raise ScenarioError(f"{loc}: expected a number or list of numbers")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


_PARAM_SECTIONS = {
    "planner": PlannerParams,
    "admittance": AdmittanceParams,
    "flocking": FlockParams,
    "repulsion": RepulsionParams,
    "sim": SimParams,
}


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; defaults fill omitted fields."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario is not valid YAML: {exc}") from exc
    raw = _require_mapping(raw if raw is not None else {}, "scenario")
    _check_keys(raw, {"obstacles", "agents", "goal", "mode", "operator_script",
                      "params"}, "scenario")
    if "agents" not in raw:
        raise ScenarioError("scenario: missing required key 'agents'")
    if "goal" not in raw:
        raise ScenarioError("scenario: missing required key 'goal'")

    scenario = Scenario(
        obstacles=_parse_obstacles(raw.get("obstacles", []), "obstacles"),
        agent_starts=_parse_agents(raw["agents"], "agents"),
        goal=_position(raw["goal"], "goal"),
        operator_script=_parse_script(raw.get("operator_script", []),
                                      "operator_script"),
    )
    mode = raw.get("mode", "shared")
    if mode not in MODES:
        raise ScenarioError(f"mode: expected one of {MODES}, got {mode!r}")
    scenario.mode = mode

    params = _require_mapping(raw.get("params", {}), "params")
    _check_keys(params, set(_PARAM_SECTIONS), "params")
    for section, cls in _PARAM_SECTIONS.items():
        if section in params:
            setattr(scenario, section,
                    _build_params(cls, params[section], f"params.{section}"))

    truth = scenario.truth_map()
    centers = truth.occupied_centers()
    for aid, start in scenario.agent_starts:
        if centers.shape[0]:
            d2 = np.einsum("nk,nk->n", centers - start, centers - start)
            if float(d2.min()) < scenario.planner.clearance ** 2:
                raise ScenarioError(f"agents: start of agent {aid} is in collision")
    return scenario


def load_scenario_file(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())
