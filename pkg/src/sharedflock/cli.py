"""Command line entry point: run scenarios, compare modes, replay traces.

Exit codes: 0 when the team reaches the goal, 2 on timeout, 1 on any error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .bridge import Bridge
from .engine import MetricsReport, SimHalt, SimWorld, read_trace, write_trace
from .scenario import Scenario, ScenarioError, _parse_script, load_scenario_file

EXIT_GOAL = 0
EXIT_ERROR = 1
EXIT_TIMEOUT = 2
EXIT_INTERRUPT = 130


def _load_script_file(path: str):
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh.read())
    if isinstance(raw, dict) and "operator_script" in raw:
        raw = raw["operator_script"]
    if raw is None:
        raw = []
    return _parse_script(raw, "operator_script")


def _prepare_scenario(args) -> Scenario:
    scenario = load_scenario_file(args.scenario)
    if getattr(args, "mode", None):
        scenario.mode = args.mode
    if getattr(args, "script", None):
        scenario.operator_script = _load_script_file(args.script)
    if getattr(args, "duration", None):
        scenario.sim.duration_max = float(args.duration)
    return scenario


def _append_metrics(path: str, report: MetricsReport) -> None:
    target = Path(path)
    need_header = not target.exists() or target.stat().st_size == 0
    with open(target, "a", encoding="utf-8") as fh:
        if need_header:
            fh.write(MetricsReport.csv_header() + "\n")
        fh.write(report.csv_row() + "\n")


def _make_pace(dt: float):
    start = time.perf_counter()

    def pace(clock):
        target = start + clock.tick * dt
        delay = target - time.perf_counter()
        if delay > 0:
            time.sleep(delay)

    return pace


def cmd_run(args) -> int:
    try:
        scenario = _prepare_scenario(args)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    kernels.warmup()
    sim = SimWorld(scenario)
    bridge = None
    try:
        if args.serve:
            bridge = Bridge(sim, host=args.host, port=args.port,
                            static_dir=args.static_dir)
            bridge.start()
            bridge.attach(sim)
            print(f"serving on {bridge.url}", file=sys.stderr)
            if not scenario.operator_script:
                print("awaiting take_control from a console...", file=sys.stderr)
                while not bridge.has_owner:
                    time.sleep(0.05)
        pace = _make_pace(scenario.sim.dt) if args.serve else None
        report = sim.run(pace=pace)
    except KeyboardInterrupt:
        return EXIT_INTERRUPT
    except SimHalt as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        if bridge is not None:
            bridge.stop()
    if args.metrics:
        _append_metrics(args.metrics, report)
    if args.trace:
        write_trace(args.trace, sim.header(), sim.records)
    print(MetricsReport.csv_header())
    print(report.csv_row())
    return EXIT_GOAL if sim.reached_goal else EXIT_TIMEOUT


def cmd_compare(args) -> int:
    runs = []
    for label, mode in (("a", args.mode_a), ("b", args.mode_b)):
        ns = argparse.Namespace(scenario=args.scenario, mode=mode,
                                script=args.script, duration=args.duration)
        try:
            scenario = _prepare_scenario(ns)
        except (ScenarioError, OSError) as exc:
            print(f"error ({label}): {exc}", file=sys.stderr)
            return EXIT_ERROR
        kernels.warmup()
        sim = SimWorld(scenario)
        try:
            report = sim.run()
        except SimHalt as exc:
            print(f"error ({label}): {exc}", file=sys.stderr)
            return EXIT_ERROR
        runs.append((mode, report, sim.reached_goal))

    (mode_a, rep_a, ok_a), (mode_b, rep_b, ok_b) = runs
    name_w = max(len(f) for f in MetricsReport.FIELDS) + 2
    print(f"{'metric':<{name_w}}{mode_a:>16}{mode_b:>16}{'delta':>16}")
    for fname in MetricsReport.FIELDS:
        va = getattr(rep_a, fname)
        vb = getattr(rep_b, fname)
        if fname == "timeout":
            print(f"{fname:<{name_w}}{str(va):>16}{str(vb):>16}{'':>16}")
            continue
        print(f"{fname:<{name_w}}{va:>16.4f}{vb:>16.4f}{vb - va:>+16.4f}")
    if args.metrics:
        _append_metrics(args.metrics, rep_a)
        _append_metrics(args.metrics, rep_b)
    return EXIT_GOAL if (ok_a and ok_b) else EXIT_TIMEOUT


class ReplayAdapter:
    """Feeds a recorded trace through the bridge as if it were live."""

    def __init__(self, header: dict):
        self.header = header
        self.latest: dict | None = None
        self.last_path: dict | None = None
        self.occupied: list[list[int]] = []
        self._seen = set()

    def update(self, record: dict) -> None:
        self.latest = record
        if record.get("replanned") and "path" in record:
            self.last_path = record["path"]
        for key in record["new_voxels"]:
            tup = tuple(key)
            if tup not in self._seen:
                self._seen.add(tup)
                self.occupied.append(list(key))

    def grid(self) -> dict:
        return {"resolution": self.header["resolution"],
                "origin": self.header["origin"]}

    def stamp_ms(self) -> int:
        t = self.latest["t"] if self.latest else 0.0
        return int(round(t * 1000))

    def current_tick(self) -> int:
        return self.latest["tick"] if self.latest else 0

    def barycenter(self) -> list:
        if self.latest:
            return self.latest["p_bar"]
        starts = [a["start"] for a in self.header["agents"]]
        return list(np.mean(np.array(starts), axis=0))

    def snapshot(self) -> dict:
        if self.latest:
            agents = [{"id": a["id"], "p": a["p"], "v": a["v"],
                       "p_cmd": a["p_cmd"]} for a in self.latest["agents"]]
            pc = {"p": self.latest["p_c"], "v": self.latest["v_c"]}
        else:
            agents = [{"id": a["id"], "p": a["start"], "v": [0.0, 0.0, 0.0],
                       "p_cmd": a["start"]} for a in self.header["agents"]]
            pc = {"p": self.barycenter(), "v": [0.0, 0.0, 0.0]}
        return {
            "agents": agents,
            "pc": pc,
            "goal": {"p": self.header["goal"],
                     "tolerance": self.header["goal_tolerance"]},
            "path": self.last_path,
            "occupied": list(self.occupied),
        }

    def submit(self, inp, tick) -> None:
        pass  # a replay has no live simulation to steer

    def set_goal(self, p) -> bool:
        return False


def cmd_replay(args) -> int:
    try:
        header, records = read_trace(args.trace)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    adapter = ReplayAdapter(header)
    bridge = Bridge(adapter, host=args.host, port=args.port,
                    static_dir=args.static_dir)
    try:
        bridge.start()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"replaying {len(records)} ticks on {bridge.url}", file=sys.stderr)
    try:
        prev_t = None
        for record in records:
            if prev_t is not None and args.speed > 0:
                time.sleep(max(0.0, (record["t"] - prev_t) / args.speed))
            prev_t = record["t"]
            adapter.update(record)
            bridge.feed(record)
        time.sleep(0.2)  # let the last frames flush before shutdown
    except KeyboardInterrupt:
        return EXIT_INTERRUPT
    finally:
        bridge.stop()
    return EXIT_GOAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sharedflock",
        description="Shared-control drone team simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario to goal or timeout")
    run.add_argument("--scenario", required=True, help="scenario YAML file")
    run.add_argument("--mode", choices=("baseline", "shared"))
    run.add_argument("--headless", action="store_true",
                     help="no-op compatibility flag; runs are headless unless --serve")
    run.add_argument("--serve", action="store_true",
                     help="serve the WebSocket bridge and pace to real time")
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--port", type=int, default=9001)
    run.add_argument("--static-dir", help="directory of console assets to serve")
    run.add_argument("--metrics", help="append one CSV row to this file")
    run.add_argument("--trace", help="write the per-tick trace to this file")
    run.add_argument("--script", help="operator script YAML overriding the scenario's")
    run.add_argument("--duration", type=float, help="override duration_max, s")
    run.add_argument("--seed", type=int, default=42,
                     help="reserved for scripted-operator jitter; unused today")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run two modes and diff their metrics")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--mode-a", default="baseline", choices=("baseline", "shared"))
    cmp_.add_argument("--mode-b", default="shared", choices=("baseline", "shared"))
    cmp_.add_argument("--script", help="operator script YAML applied to both runs")
    cmp_.add_argument("--duration", type=float)
    cmp_.add_argument("--metrics", help="append both CSV rows to this file")
    cmp_.add_argument("--seed", type=int, default=42)
    cmp_.set_defaults(func=cmd_compare)

    rep = sub.add_parser("replay", help="re-publish a recorded trace over the bridge")
    rep.add_argument("--trace", required=True)
    rep.add_argument("--host", default="127.0.0.1")
    rep.add_argument("--port", type=int, default=9001)
    rep.add_argument("--static-dir")
    rep.add_argument("--speed", type=float, default=1.0,
                     help="time multiplier; 0 replays as fast as possible")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
