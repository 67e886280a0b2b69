"""Command-line interface: run one session, execute a plan, aggregate traces,
validate fixture files, or serve sessions to external policies over TCP."""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import benchkit, envsim, policies, protocol
from .reward import RewardParams
from .session import SessionConfig, run_session, serialize_trace
from .timecore import BudgetSpec, Duration, LatencyModel
from .timerlink import TimerConfig


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if path.suffix == ".toml":
        with open(path, "rb") as f:
            return tomllib.load(f)
    return json.loads(path.read_text())


def _load_env_from_config(env: dict):
    kind = env.get("kind")
    if kind == "game":
        if "path" in env:
            return kind, envsim.load_game_spec(Path(env["path"]).read_bytes())
        return kind, envsim.load_fixture_game(env["fixture"])
    if kind == "reasoning":
        if "task" in env:
            return kind, envsim.reasoning_task_from_json(env["task"])
        if "path" in env:
            tasks = envsim.load_reasoning_tasks(Path(env["path"]).read_bytes())
        else:
            tasks = envsim.load_fixture_reasoning_tasks()
        wanted = env.get("fixture")
        for task in tasks:
            if wanted is None or task.id == wanted:
                return kind, task
        raise SystemExit(f"no reasoning task {wanted!r}")
    if kind == "ml":
        if "path" in env:
            return kind, envsim.load_ml_task(Path(env["path"]).read_bytes())
        return kind, envsim.load_fixture_ml_task(env["fixture"])
    raise SystemExit(f"unknown env kind: {kind!r}")


def session_config_from_json(obj: dict, seed: int | None = None, real_time: bool = False) -> SessionConfig:
    kind, env = _load_env_from_config(obj["env"])
    return SessionConfig(
        env_kind=kind,
        game=env if kind == "game" else None,
        task=env if kind == "reasoning" else None,
        ml_task=env if kind == "ml" else None,
        budget=BudgetSpec.from_json(obj["budget"]),
        latency=LatencyModel.from_json(obj.get("latency", {"kind": "none"})),
        timer=TimerConfig.from_json(obj.get("timer", {})),
        reward_params=RewardParams.from_json(
            obj.get("reward_params", {"task_kind": kind})
        ),
        max_steps=int(obj.get("max_steps", 200)),
        seed=seed if seed is not None else int(obj.get("seed", 0)),
        query_latency=Duration(int(obj.get("query_latency_us", 500_000))),
        strict_format=bool(obj.get("strict_format", False)),
        real_time=real_time,
    )


def _cmd_run(args) -> int:
    config_obj = load_config_file(args.config)
    config = session_config_from_json(config_obj, seed=args.seed, real_time=args.real_time)
    if args.policy_cmd:
        policy = protocol.SubprocessPolicy(
            args.policy_cmd.split(), config.session_id, config.env_kind
        )
    else:
        pspec = config_obj.get("policy")
        if pspec is None:
            raise SystemExit("config needs a 'policy' record, or pass --policy-cmd")
        if "seed" not in pspec:
            # stay coupled to the session seed unless the record pins one
            pspec = {**pspec, "seed": benchkit.mix_seed(config.seed, 2)}
        policy = policies.build_policy(pspec)
    result = run_session(policy, config)
    if isinstance(policy, protocol.RemotePolicy):
        policy.finish(result.summary_json())
        policy.close()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.jsonl").write_text(serialize_trace(result))
    print(json.dumps(result.summary_json(), sort_keys=True, indent=2))
    return 0


def _cmd_bench(args) -> int:
    plan_obj = load_config_file(args.plan)
    if args.seed is not None:
        plan_obj["base_seed"] = args.seed
    plan = benchkit.ExperimentPlan.from_json(plan_obj)
    out = Path(args.out)
    cells = benchkit.run_plan(plan, out_dir=out, real_time=args.real_time)
    written = benchkit.emit_report(cells, out, fmt=args.format)
    for path in written:
        print(path)
    return 0


def _cmd_report(args) -> int:
    root = Path(args.traces)
    rows = []
    for cell_dir in sorted(p for p in root.rglob("*") if p.is_dir()):
        summaries = []
        for trace_file in sorted(cell_dir.glob("ep*.jsonl")):
            last = trace_file.read_text().strip().splitlines()[-1]
            event = json.loads(last)
            if event.get("kind") == "session_end":
                summaries.append(event["payload"])
        if summaries:
            rows.append(
                {
                    "cell": str(cell_dir.relative_to(root)),
                    "episodes": len(summaries),
                    "mean_reward": sum(s["reward"]["total"] for s in summaries)
                    / len(summaries),
                    "on_time_rate": sum(1 for s in summaries if s["on_time"])
                    / len(summaries),
                    "mean_steps": sum(s["steps"] for s in summaries) / len(summaries),
                    "mean_effective_s": sum(s["effective_time_us"] for s in summaries)
                    / len(summaries)
                    / 1e6,
                }
            )
    if not rows:
        raise SystemExit(f"no trace files under {root}")
    text = json.dumps({"cells": rows}, sort_keys=True, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "aggregated.json").write_text(text + "\n")
        print(out / "aggregated.json")
    else:
        print(text)
    return 0


def _cmd_validate(args) -> int:
    failures = 0
    for path in args.files:
        p = Path(path)
        try:
            if p.suffix == ".jsonl":
                tasks = envsim.load_reasoning_tasks(p.read_bytes())
                print(f"ok: {p} ({len(tasks)} reasoning tasks)")
            else:
                obj = json.loads(p.read_text())
                if "states" in obj:
                    spec = envsim.game_spec_from_json(obj)
                    print(f"ok: {p} (game {spec.name!r}, max score {spec.max_score})")
                else:
                    task = envsim.ml_task_from_json(obj)
                    print(f"ok: {p} (ml task {task.id!r}, {len(task.approaches)} approaches)")
        except (envsim.SpecValidationError, json.JSONDecodeError, KeyError) as exc:
            failures += 1
            print(f"FAIL: {p}: {exc}")
    return 1 if failures else 0


def _cmd_serve(args) -> int:
    config_obj = load_config_file(args.config)
    server = socket.create_server((args.host, args.port))
    actual_port = server.getsockname()[1]
    print(f"listening on {args.host}:{actual_port}", flush=True)
    sessions = 0
    try:
        while args.max_sessions == 0 or sessions < args.max_sessions:
            conn, _addr = server.accept()
            sessions += 1
            config = session_config_from_json(
                config_obj,
                seed=args.seed if args.seed is not None else sessions,
                real_time=args.real_time,
            )
            policy = None
            try:
                policy = protocol.SocketPolicy(conn, config.session_id, config.env_kind)
                result = run_session(policy, config)
                policy.finish(result.summary_json())
                print(json.dumps(result.summary_json(), sort_keys=True), flush=True)
            except protocol.ProtocolError as exc:
                print(f"session aborted: {exc}", file=sys.stderr, flush=True)
            finally:
                if policy is not None:
                    policy.close()
                else:
                    conn.close()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timely",
        description="Wall-clock-budgeted agentic-session simulator and benchmark harness",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    timing = parser.add_mutually_exclusive_group()
    timing.add_argument(
        "--virtual-time", dest="real_time", action="store_false",
        help="advance clocks instantly (default)",
    )
    timing.add_argument(
        "--real-time", dest="real_time", action="store_true",
        help="sleep for declared and sampled durations",
    )
    parser.set_defaults(real_time=False)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")

    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one session from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--policy-cmd", default=None, help="external policy command (stdio)")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="execute an experiment plan file")
    p_bench.add_argument("--plan", required=True)
    p_bench.set_defaults(func=_cmd_bench)

    p_report = sub.add_parser("report", help="aggregate existing trace directories")
    p_report.add_argument("--traces", required=True)
    p_report.set_defaults(func=_cmd_report)

    p_validate = sub.add_parser("validate", help="lint game specs and task files")
    p_validate.add_argument("files", nargs="+")
    p_validate.set_defaults(func=_cmd_validate)

    p_serve = sub.add_parser("serve", help="TCP policy server mode")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument(
        "--max-sessions", type=int, default=0, help="stop after N sessions (0 = forever)"
    )
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench" and not args.out:
        raise SystemExit("bench requires --out")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
