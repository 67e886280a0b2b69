"""Acceptance criterion 10: the client contract test.

Runs a full reasoning session against the harness's `serve` mode with the
bundled mock LLM server, and a second session over stdio via the harness
`run --policy-cmd` path to inspect the written trace. The harness is only
ever exercised through its CLI and wire protocol.
"""

import functools
import json
import subprocess
import sys

import pytest

from timely_policy_client import EndpointConfig, MockLLMServer
from timely_policy_client.adapter import attach, to_chat_tools

SESSION_CONFIG = {
    "env": {"kind": "reasoning", "fixture": "cylinder-height"},
    "budget": {"kind": "per_case", "baseline_x_us": 60_000_000, "factor_n": "1"},
    "max_steps": 20,
}

MOCK_SCRIPT = [
    {"content": "", "tool_calls": [{"function": {"name": "get_duration", "arguments": "{}"}}]},
    {"content": "<answer>\\boxed{5}</answer>"
                "<conclusion>total duration: 1.00 seconds</conclusion>"},
]


def criterion(number: int, title: str):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number}: FAIL — {title}")
                raise
            print(f"ACCEPTANCE {number}: PASS — {title}")

        return wrapper

    return decorate


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "session.json"
    path.write_text(json.dumps(SESSION_CONFIG))
    return path


def start_serve(config_path):
    proc = subprocess.Popen(
        [sys.executable, "-m", "timely.cli",
         "serve", "--config", str(config_path), "--max-sessions", "1"],
        stdout=subprocess.PIPE,
    )
    line = proc.stdout.readline().decode()
    assert line.startswith("listening on "), line
    return proc, int(line.rsplit(":", 1)[1])


@criterion(10, "client contract: full session via serve, measured durations, schema round-trip")
def test_criterion_10_client_contract(config_path):
    with MockLLMServer(MOCK_SCRIPT, latency_s=0.01) as server:
        proc, port = start_serve(config_path)
        try:
            endpoint = EndpointConfig(base_url=server.url, model_name="mock-model")
            adapter = attach(endpoint, f"tcp:127.0.0.1:{port}")
            summary_line = proc.stdout.readline().decode()
            proc.wait(timeout=10)
        finally:
            if proc.poll() is None:
                proc.kill()

        # full session completed on time with the scripted final answer
        summary = json.loads(summary_line)
        assert summary["termination"] == "final_answer"
        assert summary["on_time"] is True
        assert summary["raw_accuracy"] == 1.0
        assert adapter.summary == summary

        # declared generation times are measured, hence nonzero
        assert len(adapter.declared_gen_times_us) == 2
        assert all(t > 0 for t in adapter.declared_gen_times_us)
        assert summary["effective_time_us"] > 0

        # tool schemas round-trip one-to-one: what the harness advertised in
        # the handshake is exactly what the LLM endpoint was offered
        assert set(adapter.wire_tools) == {"get_duration"}
        for request in server.requests:
            assert request["tools"] == to_chat_tools(adapter.wire_tools)
            recovered = {
                t["function"]["name"]: {
                    arg: spec["type"]
                    for arg, spec in t["function"]["parameters"]["properties"].items()
                }
                for t in request["tools"]
            }
            assert recovered == adapter.wire_tools


def test_stdio_trace_has_measured_durations(config_path, tmp_path):
    with MockLLMServer(MOCK_SCRIPT, latency_s=0.01) as server:
        out_dir = tmp_path / "out"
        policy_cmd = (
            f"{sys.executable} -m timely_policy_client.cli "
            f"--endpoint {server.url} --model mock-model --connect stdio"
        )
        result = subprocess.run(
            [sys.executable, "-m", "timely.cli", "--out", str(out_dir),
             "run", "--config", str(config_path), "--policy-cmd", policy_cmd],
            capture_output=True, timeout=60,
        )
    assert result.returncode == 0, result.stderr.decode()
    summary = json.loads(result.stdout)
    assert summary["termination"] == "final_answer"

    events = [
        json.loads(line)
        for line in (out_dir / "trace.jsonl").read_text().strip().splitlines()
    ]
    turns = [e for e in events if e["kind"] == "policy_turn"]
    assert len(turns) == 2
    assert all(e["payload"]["declared_gen_time_us"] > 0 for e in turns)


def test_protocol_mismatch_aborts(config_path):
    # a harness speaking a different protocol version is refused up front
    import socket
    import threading

    from timely_policy_client.adapter import ProtocolMismatch

    server_sock = socket.create_server(("127.0.0.1", 0))
    port = server_sock.getsockname()[1]

    def fake_harness():
        conn, _ = server_sock.accept()
        with conn:
            conn.makefile("rb").readline()
            conn.sendall(
                json.dumps({"kind": "handshake", "session_id": "s", "seq": 0,
                            "payload": {"protocol": "timely/2"}}).encode() + b"\n"
            )

    thread = threading.Thread(target=fake_harness, daemon=True)
    thread.start()
    endpoint = EndpointConfig(base_url="http://127.0.0.1:9", model_name="m")
    with pytest.raises(ProtocolMismatch):
        attach(endpoint, f"tcp:127.0.0.1:{port}")
    server_sock.close()
