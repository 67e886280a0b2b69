import csv
import json
import socket
import subprocess
import sys
import threading

import pytest

from timely.cli import load_config_file, main
from timely.protocol import PROTOCOL_VERSION


SESSION_CONFIG = {
    "env": {"kind": "game", "fixture": "mini-detective"},
    "budget": {"kind": "step_based", "tau_us": 10_000_000, "multiple_k": "10"},
    "policy": {"kind": "synthetic_game", "gen_time_us": 1_000_000, "quality_q": 1.0},
    "max_steps": 100,
}

PLAN = {
    "name": "cliplan",
    "envs": [{"kind": "game", "name": "mini-detective"}],
    "policies": [
        {"name": "syn", "kind": "synthetic_game", "gen_time_us": 1_000_000, "quality_q": 0.8}
    ],
    "latency_regimes": [{"name": "none", "model": {"kind": "none"}}],
    "budget_multiples": [1, 2],
    "episodes_per_cell": 2,
    "base_seed": 3,
}


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "session.json"
    path.write_text(json.dumps(SESSION_CONFIG))
    return path


class TestConfigLoading:
    def test_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"a": 1}')
        assert load_config_file(path) == {"a": 1}

    def test_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('name = "plan"\n[timer]\nalpha = "1/2"\n')
        assert load_config_file(path) == {"name": "plan", "timer": {"alpha": "1/2"}}


class TestRun:
    def test_run_prints_summary(self, config_path, capsys):
        assert main(["run", "--config", str(config_path)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["on_time"] is True
        assert summary["termination"] in ("final_answer", "budget_exceeded", "env_terminal")

    def test_run_writes_trace(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["--out", str(out), "run", "--config", str(config_path)]) == 0
        lines = (out / "trace.jsonl").read_text().strip().splitlines()
        assert json.loads(lines[0])["kind"] == "session_start"
        assert json.loads(lines[-1])["kind"] == "session_end"

    def test_seed_override_changes_outcome_distribution(self, tmp_path, capsys):
        config = dict(SESSION_CONFIG)
        config["policy"] = {"kind": "synthetic_game", "gen_time_us": 1_000_000, "quality_q": 0.5}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(config))
        steps = set()
        for seed in range(6):
            main(["--seed", str(seed), "run", "--config", str(path)])
            steps.add(json.loads(capsys.readouterr().out)["steps"])
        assert len(steps) > 1

    def test_missing_policy_rejected(self, tmp_path, capsys):
        config = {k: v for k, v in SESSION_CONFIG.items() if k != "policy"}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(config))
        with pytest.raises(SystemExit, match="policy"):
            main(["run", "--config", str(path)])


class TestBench:
    def test_bench_and_report(self, tmp_path, capsys):
        plan_path = tmp_path / "plan.json"
        plan_path.write_text(json.dumps(PLAN))
        out = tmp_path / "out"
        assert main(["--out", str(out), "bench", "--plan", str(plan_path)]) == 0
        rows = list(csv.DictReader((out / "report.csv").open()))
        assert len(rows) == 2
        assert (out / "steps_by_budget.csv").exists()
        capsys.readouterr()

        assert main(["report", "--traces", str(out / "cliplan")]) == 0
        aggregated = json.loads(capsys.readouterr().out)
        assert len(aggregated["cells"]) == 2
        assert all(c["episodes"] == 2 for c in aggregated["cells"])

    def test_bench_requires_out(self, tmp_path):
        plan_path = tmp_path / "plan.json"
        plan_path.write_text(json.dumps(PLAN))
        with pytest.raises(SystemExit, match="--out"):
            main(["bench", "--plan", str(plan_path)])


class TestValidate:
    def test_valid_and_invalid_files(self, tmp_path, capsys):
        good = tmp_path / "good.json"
        good.write_text(
            json.dumps(
                {
                    "name": "g",
                    "start": "a",
                    "max_score": 5,
                    "states": {
                        "a": {
                            "description": "",
                            "transitions": {"go": {"next": "a", "score_delta": 5}},
                        }
                    },
                }
            )
        )
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "b", "start": "x", "max_score": 1, "states": {}}))
        assert main(["validate", str(good), str(bad)]) == 1
        out = capsys.readouterr().out
        assert f"ok: {good}" in out
        assert f"FAIL: {bad}" in out


def _read_port(proc):
    line = proc.stdout.readline().decode()
    assert line.startswith("listening on "), line
    return int(line.rsplit(":", 1)[1])


class TestServe:
    def test_serve_one_session(self, tmp_path):
        config = {
            "env": {"kind": "reasoning", "fixture": "cylinder-height"},
            "budget": {"kind": "per_case", "baseline_x_us": 60_000_000, "factor_n": "1"},
        }
        path = tmp_path / "serve.json"
        path.write_text(json.dumps(config))
        proc = subprocess.Popen(
            [
                sys.executable, "-m", "timely.cli",
                "serve", "--config", str(path), "--max-sessions", "1",
            ],
            stdout=subprocess.PIPE,
        )
        try:
            port = _read_port(proc)
            with socket.create_connection(("127.0.0.1", port), timeout=10) as conn:
                reader = conn.makefile("rb")
                writer = conn.makefile("wb")

                def send(obj):
                    writer.write((json.dumps(obj) + "\n").encode())
                    writer.flush()

                send({"kind": "handshake", "session_id": "c", "seq": 0,
                      "payload": {"protocol": PROTOCOL_VERSION}})
                handshake = json.loads(reader.readline())
                assert handshake["payload"]["protocol"] == PROTOCOL_VERSION
                assert "get_duration" in handshake["payload"]["tools"]

                observation = json.loads(reader.readline())
                assert observation["kind"] == "observation"
                seq = observation["seq"]
                body = "<answer>\\boxed{5}</answer><conclusion>total duration: 1.00 seconds</conclusion>"
                send({"kind": "policy_output", "session_id": "c", "seq": seq,
                      "payload": {"observation_seq": seq, "declared_gen_time_us": 1_000_000,
                                   "body": body, "tool_call": None}})
                end = json.loads(reader.readline())
                assert end["kind"] == "session_end"
                assert end["payload"]["termination"] == "final_answer"
            proc.wait(timeout=10)
        finally:
            if proc.poll() is None:
                proc.kill()
        assert proc.returncode == 0
