"""End-to-end command line runs through main(), asserting exit codes,
printed CSV, metrics files, traces, and the replay service."""

from __future__ import annotations

import json
import time

import pytest

from sharedflock.cli import (EXIT_ERROR, EXIT_GOAL, EXIT_TIMEOUT,
                             ReplayAdapter, build_parser, main)
from sharedflock.engine import MetricsReport, read_trace

from test_bridge import Collector, free_port

QUICK = """
agents:
  - [0.0, 0.4]
  - [0.0, -0.4]
goal: [1.4, 0.0]
params: {sim: {duration_max: 20.0}}
"""


@pytest.fixture()
def quick_scenario(tmp_path):
    path = tmp_path / "quick.yaml"
    path.write_text(QUICK)
    return str(path)


def test_run_reaches_goal_and_prints_csv(quick_scenario, capsys):
    code = main(["run", "--scenario", quick_scenario])
    assert code == EXIT_GOAL
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == MetricsReport.csv_header()
    row = out[1].split(",")
    assert len(row) == len(MetricsReport.FIELDS)
    assert row[-1] == "False"  # no timeout
    assert 0.0 < float(row[0]) < 20.0  # time to goal


def test_run_timeout_exit_code(quick_scenario, capsys):
    code = main(["run", "--scenario", quick_scenario, "--duration", "0.3"])
    assert code == EXIT_TIMEOUT
    row = capsys.readouterr().out.strip().splitlines()[1].split(",")
    assert row[-1] == "True"


def test_run_rejects_bad_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("agents: [[0, 0]]\ngoal: [1, 0]\nagnts: 3\n")
    assert main(["run", "--scenario", str(bad)]) == EXIT_ERROR
    assert "agnts" in capsys.readouterr().err


def test_run_missing_file_is_an_error(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "nope.yaml")]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_metrics_file_appends_header_once(quick_scenario, tmp_path):
    metrics = tmp_path / "metrics.csv"
    main(["run", "--scenario", quick_scenario, "--duration", "0.2",
          "--metrics", str(metrics)])
    main(["run", "--scenario", quick_scenario, "--duration", "0.2",
          "--metrics", str(metrics)])
    lines = metrics.read_text().strip().splitlines()
    assert lines[0] == MetricsReport.csv_header()
    assert len(lines) == 3
    assert lines[1] == lines[2]  # identical runs, identical rows


def test_trace_output_is_readable(quick_scenario, tmp_path):
    trace = tmp_path / "run.jsonl"
    code = main(["run", "--scenario", quick_scenario, "--duration", "0.5",
                 "--trace", str(trace)])
    assert code == EXIT_TIMEOUT
    header, records = read_trace(str(trace))
    assert header["dt"] == 0.02
    assert len(records) == 26  # ticks 0 through 25 inclusive
    assert records[0]["t"] == 0.0
    assert records[-1]["t"] == pytest.approx(0.5)


def test_script_file_overrides_scenario(quick_scenario, tmp_path, capsys):
    script = tmp_path / "script.yaml"
    script.write_text(
        "- {t: 0.0, position: [0.0, 0.0, 1.0]}\n"
        "- {t: 0.4, position: [0.2, 0.3, 1.0]}\n")
    trace = tmp_path / "scripted.jsonl"
    code = main(["run", "--scenario", quick_scenario, "--mode", "shared",
                 "--duration", "0.5", "--script", str(script),
                 "--trace", str(trace)])
    assert code == EXIT_TIMEOUT
    _, records = read_trace(str(trace))
    assert any(r["take_control"] for r in records)
    # wrapped form parses the same
    script.write_text(
        "operator_script:\n"
        "  - {t: 0.0, position: [0.0, 0.0, 1.0]}\n")
    assert main(["run", "--scenario", quick_scenario, "--duration", "0.2",
                 "--script", str(script)]) == EXIT_TIMEOUT
    capsys.readouterr()


def test_bad_script_file_is_an_error(quick_scenario, tmp_path, capsys):
    script = tmp_path / "script.yaml"
    script.write_text("- {t: 0.4, position: [0, 0, 1]}\n"
                      "- {t: 0.1, position: [1, 0, 1]}\n")
    assert main(["run", "--scenario", quick_scenario,
                 "--script", str(script)]) == EXIT_ERROR
    assert "increase" in capsys.readouterr().err


def test_compare_identical_modes_has_zero_deltas(quick_scenario, capsys):
    code = main(["compare", "--scenario", quick_scenario, "--duration", "0.4",
                 "--mode-a", "baseline", "--mode-b", "baseline"])
    assert code == EXIT_TIMEOUT
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split() == ["metric", "baseline", "baseline", "delta"]
    body = [ln.split() for ln in lines[1:]]
    assert {row[0] for row in body} == set(MetricsReport.FIELDS)
    for row in body:
        if row[0] == "timeout":
            assert row[1] == row[2] == "True"
        else:
            assert row[1] == row[2]
            if row[1] != "inf":  # inf - inf prints as nan on the empty map
                assert float(row[3]) == 0.0


def test_compare_modes_differ_in_rows(quick_scenario, tmp_path, capsys):
    metrics = tmp_path / "cmp.csv"
    code = main(["compare", "--scenario", quick_scenario,
                 "--metrics", str(metrics)])
    assert code == EXIT_GOAL
    assert len(metrics.read_text().strip().splitlines()) == 3
    out = capsys.readouterr().out
    assert "time_to_goal" in out and "delta" in out


def test_compare_bad_scenario_names_the_run(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("goal: [1]\nagents: [[0,0]]\n")
    assert main(["compare", "--scenario", str(bad)]) == EXIT_ERROR
    assert "error (a):" in capsys.readouterr().err


def test_replay_streams_a_recorded_run(quick_scenario, tmp_path, capsys):
    trace = tmp_path / "run.jsonl"
    main(["run", "--scenario", quick_scenario, "--duration", "1.0",
          "--trace", str(trace)])
    capsys.readouterr()

    port = free_port()
    import threading
    result: list[int] = []

    def serve():
        result.append(main(["replay", "--trace", str(trace),
                            "--port", str(port), "--speed", "0"]))

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    deadline = time.time() + 5.0
    client = None
    while time.time() < deadline and client is None:
        try:
            client = Collector(f"ws://127.0.0.1:{port}/stream")
        except (ConnectionRefusedError, OSError, TimeoutError):
            time.sleep(0.02)
    assert client is not None
    try:
        client.wait_for(lambda m: m["topic"] == "robot_odom_pc")
        client.wait_for(lambda m: m["topic"] == "final_goal")
        thread.join(timeout=10)
        assert result == [EXIT_GOAL]
        odom = client.by_topic("robot_odom_0")
        assert odom and odom[-1]["stamp_ms"] <= 1000
    finally:
        client.close()


def test_replay_rejects_missing_and_corrupt_traces(tmp_path, capsys):
    assert main(["replay", "--trace", str(tmp_path / "none.jsonl"),
                 "--port", str(free_port())]) == EXIT_ERROR
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"format": "sharedflock-trace-1", "dt": 0.02,
                               "agents": [], "goal": [1, 0, 1]}) + "\n{oops\n")
    assert main(["replay", "--trace", str(bad),
                 "--port", str(free_port())]) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err


def test_replay_adapter_accumulates_state(quick_scenario, tmp_path):
    trace = tmp_path / "run.jsonl"
    main(["run", "--scenario", quick_scenario, "--duration", "0.4",
          "--trace", str(trace)])
    header, records = read_trace(str(trace))
    adapter = ReplayAdapter(header)
    before = adapter.snapshot()
    assert before["goal"]["p"] == [1.4, 0.0, 1.0]
    for record in records:
        adapter.update(record)
    snap = adapter.snapshot()
    assert snap["pc"]["p"] == records[-1]["p_c"]
    assert adapter.stamp_ms() == int(round(records[-1]["t"] * 1000))
    assert adapter.set_goal([9, 9, 9]) is False  # recorded goals are final
    adapter.submit(None, 0)  # accepted and ignored


def test_parser_rejects_unknown_mode(quick_scenario):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", quick_scenario, "--mode", "manual"])
    assert exc.value.code == 2


def test_parser_requires_a_command():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([])
    assert exc.value.code == 2
