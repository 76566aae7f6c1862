"""Deterministic fixed-timestep world loop.

Every tick runs the same substep order: sample operator input, discover
obstacles around agent 0, replan if the cadence says so, evaluate the virtual
force at the migration point, step the admittance dynamics, compute per-agent
flocking commands, advance agent dynamics, record the tick, and check
termination. All agent iteration is in id order, so identical scenarios
produce bitwise-identical traces.

The per-tick record doubles as the wire snapshot for the bridge and the line
format of the trace file, so live runs, trace files, and replays all flow
through the same structures.
"""

from __future__ import annotations

import dataclasses
import json
import queue
from dataclasses import dataclass, field

import numpy as np

from . import admittance as adm
from . import flocking as flk
from . import planner as pln
from .core import (AgentState, SimClock, TeamState, Vec3, as_vec3, barycenter,
                   clamp_norm, norm, vec3)
from .kernels import min_dist_sq
from .scenario import Scenario
from .voxels import VoxelMap, repulsion_force

TRACE_FORMAT = "sharedflock-trace-1"


class SimHalt(RuntimeError):
    """Raised when a state stops being finite; carries the offending tick."""

    def __init__(self, tick: int, dump: str):
        super().__init__(f"non-finite state at tick {tick}: {dump}")
        self.tick = tick
        self.dump = dump


@dataclass
class OperatorInput:
    p_u: Vec3
    v_u: Vec3
    take_control: bool
    source: str = "scripted"  # scripted | live


@dataclass
class MetricsReport:
    avg_distance_traveled: float
    time_to_goal: float
    mean_velocity: float
    min_obstacle_distance: float
    min_inter_agent_distance: float
    avg_user_force: float
    timeout: bool

    FIELDS = ("avg_distance_traveled", "time_to_goal", "mean_velocity",
              "min_obstacle_distance", "min_inter_agent_distance",
              "avg_user_force", "timeout")

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.FIELDS)

    def csv_row(self) -> str:
        vals = [getattr(self, name) for name in self.FIELDS]
        return ",".join(str(v) for v in vals)


def scripted_operator(script: list[tuple[float, Vec3]], t: float,
                      team: TeamState) -> OperatorInput:
    """Piecewise-linear marker trajectory; control is not taken before the
    first waypoint, and the marker parks at the last waypoint afterwards."""
    if not script or t < script[0][0]:
        return OperatorInput(team.barycenter_position.copy(),
                             vec3(0.0, 0.0, 0.0), take_control=False)
    for n in range(len(script) - 1):
        t0, p0 = script[n]
        t1, p1 = script[n + 1]
        if t < t1:
            frac = (t - t0) / (t1 - t0)
            v = (p1 - p0) / (t1 - t0)
            return OperatorInput(p0 + frac * (p1 - p0), v, take_control=True)
    return OperatorInput(script[-1][1].copy(), vec3(0.0, 0.0, 0.0),
                         take_control=True)


class SimWorld:
    """Owns all mutable simulation state for one scenario run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.clock = SimClock(0, scenario.sim.dt)
        self.truth = scenario.truth_map()
        self.known = VoxelMap(resolution=scenario.sim.resolution)
        self.agents = [
            AgentState(id=aid, position=start.copy(), velocity=np.zeros(3),
                       acceleration=np.zeros(3), commanded_position=start.copy())
            for aid, start in scenario.agent_starts
        ]
        self.team = TeamState.from_agents(self.agents)
        self.adm_state = adm.AdmittanceState(
            self.team.barycenter_position.copy(),
            self.team.barycenter_velocity.copy())
        self.integrator = flk.CommandIntegrator(self.agents)
        # Baseline mode turns the user term off in the planner only; the
        # operator can still drag the team through the admittance loop.
        self.plan_params = scenario.planner
        if scenario.mode == "baseline":
            self.plan_params = dataclasses.replace(scenario.planner, rho_usr=0.0)
        self.path: pln.PlannedPath | None = None
        self.operator = OperatorInput(self.team.barycenter_position.copy(),
                                      np.zeros(3), take_control=False)
        self._live_inputs: queue.SimpleQueue = queue.SimpleQueue()
        self._live_seen = False
        self.input_latency_log: list[tuple[int, int]] = []
        self.plan_ticks: list[int] = []
        self.records: list[dict] = []
        self.tick_listeners: list = []
        self.terminated = False
        self.reached_goal = False

    # ---- operator input -------------------------------------------------

    def submit_operator(self, inp: OperatorInput, submitted_tick: int | None = None) -> None:
        """Thread-safe entry point for live operator input (bridge side)."""
        self._live_inputs.put((inp, submitted_tick))

    def _sample_operator(self) -> OperatorInput:
        latest = None
        while True:
            try:
                latest = self._live_inputs.get_nowait()
            except queue.Empty:
                break
        if latest is not None:
            inp, submitted = latest
            self._live_seen = True
            self.operator = inp
            if submitted is not None:
                self.input_latency_log.append((submitted, self.clock.tick))
        if self._live_seen:
            return self.operator
        self.operator = scripted_operator(self.scenario.operator_script,
                                          self.clock.time, self.team)
        return self.operator

    # ---- world stepping --------------------------------------------------

    def header(self) -> dict:
        s = self.scenario
        return {
            "format": TRACE_FORMAT,
            "dt": s.sim.dt,
            "mode": s.mode,
            "goal": list(s.goal),
            "goal_tolerance": s.sim.goal_tolerance,
            "resolution": s.sim.resolution,
            "origin": [0.0, 0.0, 0.0],
            "truth_occupied": sorted(list(k) for k in self.truth.occupied),
            "agents": [{"id": aid, "start": list(start)}
                       for aid, start in s.agent_starts],
            "duration_max": s.sim.duration_max,
        }

    def _check_finite(self) -> None:
        fields = {"p_c": self.adm_state.p_c, "v_c": self.adm_state.v_c}
        for a in self.agents:
            fields[f"agent{a.id}.p"] = a.position
            fields[f"agent{a.id}.v"] = a.velocity
        bad = [name for name, v in fields.items() if not np.all(np.isfinite(v))]
        if bad:
            dump = ", ".join(f"{name}={fields[name]}" for name in bad)
            raise SimHalt(self.clock.tick, dump)

    def step_world(self) -> dict:
        """Advance one tick; returns the tick record."""
        s = self.scenario
        team = self.team  # state at tick start

        # (1) operator
        op = self._sample_operator()
        f_usr = adm.user_force(team.barycenter_position, team.barycenter_velocity,
                               op.p_u, op.v_u, s.admittance, op.take_control)

        # (2) perception attaches to the lowest-id agent
        fresh = self.known.discover_from(self.truth, self.agents[0].position,
                                         s.planner.horizon)

        # (3) replan on cadence, from the barycenter, against the known map
        replanned = False
        if pln.replan_due(self.clock, s.sim.replan_period):
            virtual_goal = pln.project_goal(team.barycenter_position, s.goal,
                                            s.planner.horizon)
            start_v = clamp_norm(team.barycenter_velocity, s.planner.v_max)
            self.path = pln.plan(team.barycenter_position, start_v, virtual_goal,
                                 self.known, f_usr, self.plan_params, s.repulsion)
            self.plan_ticks.append(self.clock.tick)
            replanned = True

        # (4) virtual force at the migration point
        f_rep = repulsion_force(self.adm_state.p_c, self.known, s.repulsion)
        f_v = f_usr.vector + f_rep

        # (5) admittance
        ref = adm.project_reference(team.barycenter_position, self.path,
                                    s.admittance.lookahead, s.sim.dt)
        self.adm_state = adm.step(self.adm_state, ref, f_v, s.admittance, s.sim.dt)

        # (6) flocking commands against the tick-start team snapshot
        commands = {}
        for i, agent in enumerate(self.agents):
            f_rep_i = repulsion_force(agent.position, self.known, s.repulsion)
            a_ref = flk.reference_accel(i, team, self.adm_state.p_c,
                                        self.adm_state.v_c, f_rep_i, s.flocking)
            commands[agent.id] = self.integrator.step(agent.id, a_ref,
                                                      s.sim.dt, s.flocking)

        # (7) agent dynamics: saturated PD tracking of the commanded position
        for agent in self.agents:
            p_cmd = commands[agent.id]
            _, v_cmd = self.integrator.command_of(agent.id)
            a_des = (s.sim.k_track_p * (p_cmd - agent.position)
                     + s.sim.k_track_d * (v_cmd - agent.velocity))
            a = clamp_norm(a_des, s.flocking.a_max)
            agent.acceleration = a
            agent.velocity = clamp_norm(agent.velocity + a * s.sim.dt,
                                        s.flocking.v_max)
            agent.position = agent.position + agent.velocity * s.sim.dt
            agent.commanded_position = p_cmd

        self._check_finite()
        self.team = TeamState.from_agents(self.agents)

        # (8) record the tick
        record = {
            "tick": self.clock.tick,
            "t": self.clock.time,
            "agents": [{"id": a.id, "p": list(a.position), "v": list(a.velocity),
                        "a": list(a.acceleration),
                        "p_cmd": list(a.commanded_position)}
                       for a in self.agents],
            "p_c": list(self.adm_state.p_c),
            "v_c": list(self.adm_state.v_c),
            "p_bar": list(self.team.barycenter_position),
            "v_bar": list(self.team.barycenter_velocity),
            "f_usr": list(f_usr.vector),
            "f_rep": list(f_rep),
            "p_u": list(op.p_u),
            "take_control": bool(op.take_control),
            "new_voxels": [list(k) for k in fresh],
            "replanned": replanned,
        }
        if replanned and self.path is not None:
            record["path"] = path_payload(self.path)
        self.records.append(record)
        for listener in self.tick_listeners:
            listener(record)

        # (9) termination on the fresh barycenter
        if norm(self.team.barycenter_position - s.goal) <= s.sim.goal_tolerance:
            self.terminated = True
            self.reached_goal = True
        elif self.clock.time >= s.sim.duration_max:
            self.terminated = True
        self.clock.advance()
        return record

    def run(self, max_ticks: int | None = None, pace=None) -> "MetricsReport":
        """Step until termination (goal or timeout); `pace` is an optional
        per-tick callable used by the serving mode for real-time pacing."""
        ticks = 0
        while not self.terminated:
            self.step_world()
            ticks += 1
            if pace is not None:
                pace(self.clock)
            if max_ticks is not None and ticks >= max_ticks:
                break
        return compute_metrics(self.header(), self.records)


def path_payload(path: pln.PlannedPath) -> dict:
    return {
        "partial": bool(path.partial),
        "total_duration": path.total_duration,
        "total_cost": path.total_cost,
        "primitives": [{"p0": list(p.start_position), "v0": list(p.start_velocity),
                        "u": list(p.control), "dt": p.duration}
                       for p in path.primitives],
    }


def compute_metrics(header: dict, records: list[dict]) -> MetricsReport:
    """Table-style run metrics from a trace (header + per-tick records)."""
    if not records:
        raise ValueError("empty trace")
    dt = header["dt"]
    goal = np.array(header["goal"], dtype=np.float64)
    tolerance = header["goal_tolerance"]
    starts = {a["id"]: np.array(a["start"], dtype=np.float64)
              for a in header["agents"]}
    ids = sorted(starts)
    res = header["resolution"]
    origin = np.array(header["origin"], dtype=np.float64)
    truth_keys = header["truth_occupied"]
    if truth_keys:
        centers = (np.array(truth_keys, dtype=np.float64) + 0.5) * res + origin
        centers = np.ascontiguousarray(centers)
    else:
        centers = np.zeros((0, 3))

    time_to_goal = None
    distances = {aid: 0.0 for aid in ids}
    prev = dict(starts)
    min_inter = np.inf
    force_sum = 0.0
    all_points = [np.stack([starts[aid] for aid in ids])]

    n_used = 0
    for rec in records:
        pos = {a["id"]: np.array(a["p"], dtype=np.float64) for a in rec["agents"]}
        for aid in ids:
            distances[aid] += norm(pos[aid] - prev[aid])
            prev[aid] = pos[aid]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                min_inter = min(min_inter, norm(pos[ids[i]] - pos[ids[j]]))
        force_sum += norm(np.array(rec["f_usr"], dtype=np.float64))
        all_points.append(np.stack([pos[aid] for aid in ids]))
        n_used += 1
        p_bar = np.array(rec["p_bar"], dtype=np.float64)
        if time_to_goal is None and norm(p_bar - goal) <= tolerance:
            time_to_goal = rec["tick"] * dt
            break

    timeout = time_to_goal is None
    elapsed = records[n_used - 1]["tick"] * dt if timeout else time_to_goal
    if timeout:
        elapsed = max(elapsed, dt)  # a zero-length timed-out run has no rate
    avg_distance = float(np.mean([distances[aid] for aid in ids]))
    mean_velocity = avg_distance / elapsed if elapsed > 0 else 0.0
    if centers.shape[0]:
        pts = np.ascontiguousarray(np.concatenate(all_points, axis=0))
        min_obstacle = float(np.sqrt(min_dist_sq(pts, centers)))
    else:
        min_obstacle = np.inf
    return MetricsReport(
        avg_distance_traveled=avg_distance,
        time_to_goal=float(elapsed),
        mean_velocity=float(mean_velocity),
        min_obstacle_distance=min_obstacle,
        min_inter_agent_distance=float(min_inter),
        avg_user_force=force_sum / n_used,
        timeout=timeout,
    )


def write_trace(path: str, header: dict, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace(path: str) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty trace file")
    parsed = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt trace at line {lineno}: {exc.msg}") from exc
    header = parsed[0]
    if not isinstance(header, dict) or header.get("format") != TRACE_FORMAT:
        raise ValueError("corrupt trace at line 1: missing format header")
    return header, parsed[1:]
