"""Budgeted episode orchestration: the agent/environment turn loop.

One orchestrator owns one episode: it feeds observations to a policy,
dispatches tool calls, accounts every turn's generation and tool time in a
ledger, enforces the time budget after each completed step, and finalizes a
reward with the task family's accuracy transform.
"""

from __future__ import annotations

import dataclasses
import json
import re
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from . import envsim, reward as reward_mod, timecore
from .envsim import (
    GameSpec,
    GameState,
    MLTaskModel,
    ReasoningTask,
    ToolResult,
)
from .reward import RewardOutcome, RewardParams
from .timecore import (
    BudgetSpec,
    BudgetStatus,
    Duration,
    LatencyModel,
    SeededRng,
    TimeLedger,
    ZERO,
    check_budget,
    effective_total,
    ledger_append,
    resolve_budget,
    sample_latency,
)
from .timerlink import TimerConfig, TimerRegistry, format_report_seconds

DEFAULT_QUERY_LATENCY = Duration.from_seconds(0.5)

# Tool names that only read state; they carry the fixed query latency
# instead of a draw from the session latency model.
QUERY_TOOLS = frozenset(
    {"get_duration", "get_score", "get_max_score", "get_available_actions"}
)

TOOL_SURFACES: dict[str, dict[str, dict]] = {
    "game": {
        "step": {"action": "string"},
        "get_available_actions": {},
        "get_score": {},
        "get_max_score": {},
        "end_game": {},
        "get_duration": {},
    },
    "reasoning": {
        "get_duration": {},
    },
    "ml": {
        "execute_code_and_get_duration": {"code": "string"},
        "get_duration": {},
    },
}


class PolicyError(Exception):
    """Policy transport or behavior failure; recorded, never a crash."""


@dataclass(frozen=True)
class PolicyOutput:
    """One policy turn: simulated generation latency plus body and/or tool call."""

    declared_gen_time: Duration = ZERO
    body: str = ""
    tool_call: Optional[dict] = None  # {"name": str, "arguments": dict}

    def to_json(self) -> dict:
        return {
            "declared_gen_time_us": self.declared_gen_time.micros,
            "body": self.body,
            "tool_call": self.tool_call,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PolicyOutput":
        return cls(
            declared_gen_time=Duration(int(obj.get("declared_gen_time_us", 0))),
            body=obj.get("body", ""),
            tool_call=obj.get("tool_call"),
        )


@dataclass(frozen=True)
class ParsedTags:
    summary: Optional[str] = None
    conclusion_duration: Optional[float] = None
    answer: Optional[str] = None
    score: Optional[int] = None
    accuracy: Optional[float] = None

    def any_final(self) -> bool:
        return (
            self.answer is not None
            or self.conclusion_duration is not None
            or self.score is not None
            or self.accuracy is not None
        )


_TAG_RES = {
    name: re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL)
    for name in ("summary", "conclusion", "answer", "score", "accuracy")
}
_CONCLUSION_RE = re.compile(r"total duration:\s*([0-9]+(?:\.[0-9]+)?)\s*seconds")


def parse_tags(body: str) -> ParsedTags:
    """Tolerant extraction of the first occurrence of each output tag."""
    found = {}
    for name, rx in _TAG_RES.items():
        match = rx.search(body or "")
        found[name] = match.group(1) if match else None

    conclusion_duration = None
    if found["conclusion"] is not None:
        dmatch = _CONCLUSION_RE.search(found["conclusion"])
        if dmatch:
            conclusion_duration = float(dmatch.group(1))

    score = None
    if found["score"] is not None:
        try:
            score = int(found["score"].strip())
        except ValueError:
            score = None

    accuracy = None
    if found["accuracy"] is not None:
        try:
            accuracy = float(found["accuracy"].strip())
        except ValueError:
            accuracy = None

    return ParsedTags(
        summary=found["summary"],
        conclusion_duration=conclusion_duration,
        answer=found["answer"],
        score=score,
        accuracy=accuracy,
    )


@dataclass(frozen=True)
class SessionConfig:
    env_kind: str  # game | reasoning | ml
    game: Optional[GameSpec] = None
    task: Optional[ReasoningTask] = None
    ml_task: Optional[MLTaskModel] = None
    budget: BudgetSpec = None
    latency: LatencyModel = LatencyModel.none()
    timer: TimerConfig = TimerConfig()
    reward_params: RewardParams = RewardParams()
    max_steps: int = 200
    seed: int = 0
    query_latency: Duration = DEFAULT_QUERY_LATENCY
    strict_format: bool = False
    real_time: bool = False
    session_id: str = "session"

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.env_kind not in ("game", "reasoning", "ml"):
            raise ValueError(f"unknown env kind: {self.env_kind!r}")
        if self.budget is None:
            raise ValueError("a budget spec is required")
        env = {"game": self.game, "reasoning": self.task, "ml": self.ml_task}[self.env_kind]
        if env is None:
            raise ValueError(f"missing environment for kind {self.env_kind!r}")

    def env_name(self) -> str:
        if self.env_kind == "game":
            return self.game.name
        if self.env_kind == "reasoning":
            return self.task.id
        return self.ml_task.id

    def resolved_json(self) -> dict:
        return {
            "env_kind": self.env_kind,
            "env_name": self.env_name(),
            "budget": self.budget.to_json(),
            "t_max_us": resolve_budget(self.budget).micros,
            "latency": self.latency.to_json(),
            "timer": self.timer.to_json(),
            "reward_params": self.reward_params.to_json(),
            "max_steps": self.max_steps,
            "seed": self.seed,
            "query_latency_us": self.query_latency.micros,
            "strict_format": self.strict_format,
        }


@dataclass(frozen=True)
class Observation:
    """What a policy sees each turn. Affordance fields (best_action,
    answer_hint, approach runtimes) exist for in-process scripted policies
    and are stripped from external wire observations."""

    kind: str
    seq: int
    text: str
    budget_seconds: float
    valid_actions: tuple[str, ...] = ()
    best_action: Optional[str] = None
    score: Optional[int] = None
    max_score: Optional[int] = None
    reported_seconds: Optional[float] = None
    tool_text: Optional[str] = None
    tool_accuracy: Optional[float] = None
    answer_hint: Optional[str] = None
    approach_runtimes: dict[str, float] = field(default_factory=dict)

    def to_wire_json(self) -> dict:
        return {
            "kind": self.kind,
            "seq": self.seq,
            "text": self.text,
            "budget_seconds": self.budget_seconds,
            "valid_actions": list(self.valid_actions),
            "score": self.score,
            "max_score": self.max_score,
            "reported_seconds": self.reported_seconds,
            "tool_text": self.tool_text,
            "tool_accuracy": self.tool_accuracy,
        }


class Policy(Protocol):
    def step(self, obs: Observation) -> PolicyOutput: ...


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # session_start | policy_turn | tool_call | tool_response | budget_check | session_end
    payload: dict
    cumulative_effective_us: int

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "payload": self.payload,
            "cumulative_effective_us": self.cumulative_effective_us,
        }


@dataclass(frozen=True)
class SessionResult:
    ledger: TimeLedger
    effective_time: Duration
    t_max: Duration
    on_time: bool
    termination: str  # final_answer | env_terminal | budget_exceeded | step_cap | policy_error
    raw_accuracy: float
    final_score: Optional[int]
    steps: int
    within_budget_steps: int
    reward: RewardOutcome
    trace: tuple[TraceEvent, ...]
    error: Optional[str] = None

    def summary_json(self) -> dict:
        return {
            "effective_time_us": self.effective_time.micros,
            "t_max_us": self.t_max.micros,
            "on_time": self.on_time,
            "termination": self.termination,
            "raw_accuracy": self.raw_accuracy,
            "final_score": self.final_score,
            "steps": self.steps,
            "within_budget_steps": self.within_budget_steps,
            "reward": self.reward.to_json(),
            "error": self.error,
        }


def serialize_trace(result: SessionResult) -> str:
    """Canonical JSON-lines trace rendering; byte-stable across runs."""
    lines = [
        json.dumps(event.to_json(), sort_keys=True, separators=(",", ":"))
        for event in result.trace
    ]
    return "\n".join(lines) + "\n"


def budget_sentence(kind: str, t_max: Duration) -> str:
    if kind == "game":
        return f"The time limit is {t_max.display_seconds()} seconds."
    if kind == "ml":
        return f"Please finish the task within {t_max.display_seconds()} seconds."
    return f"Please answer the question within {t_max.display_seconds()} seconds."


class _Episode:
    """Mutable state of one running session."""

    def __init__(self, policy: Policy, config: SessionConfig, registry: TimerRegistry | None):
        self.policy = policy
        self.config = config
        self.t_max = resolve_budget(config.budget)
        self.ledger = TimeLedger()
        self.rng = SeededRng(config.seed)
        self.registry = registry or TimerRegistry()
        self.owns_registry = registry is None
        self.trace: list[TraceEvent] = []
        self.game_state: Optional[GameState] = (
            envsim.initial_state(config.game) if config.env_kind == "game" else None
        )
        self.best_ml_accuracy: Optional[float] = None
        self.answer_text: Optional[str] = None
        self.saw_conclusion = False
        self.seq = 0

    @property
    def alpha(self):
        return self.config.timer.alpha

    def effective(self) -> Duration:
        return effective_total(self.ledger, self.alpha)

    def record(self, kind: str, payload: dict) -> None:
        self.trace.append(TraceEvent(kind, payload, self.effective().micros))

    def sleep_if_real(self, duration: Duration) -> None:
        if self.config.real_time and duration.micros > 0:
            _time.sleep(duration.seconds)


def _initial_text(config: SessionConfig, t_max: Duration) -> str:
    if config.env_kind == "game":
        desc = config.game.states[config.game.start].description
        return f"Game started. Initial observation: {desc} {budget_sentence('game', t_max)}"
    if config.env_kind == "reasoning":
        return f"{config.task.prompt} {budget_sentence('reasoning', t_max)}"
    return f"{config.ml_task.prompt} {budget_sentence('ml', t_max)}"


def _make_observation(
    ep: _Episode,
    text: str,
    reported: Optional[float] = None,
    tool_text: Optional[str] = None,
    tool_accuracy: Optional[float] = None,
) -> Observation:
    cfg = ep.config
    ep.seq += 1
    kwargs = dict(
        kind=cfg.env_kind,
        seq=ep.seq,
        text=text,
        budget_seconds=ep.t_max.seconds,
        reported_seconds=reported,
        tool_text=tool_text,
        tool_accuracy=tool_accuracy,
    )
    if cfg.env_kind == "game" and not ep.game_state.ended:
        kwargs["valid_actions"] = tuple(envsim.valid_actions(cfg.game, ep.game_state))
        kwargs["best_action"] = envsim.best_action(cfg.game, ep.game_state)
        kwargs["score"] = ep.game_state.score
        kwargs["max_score"] = cfg.game.max_score
    elif cfg.env_kind == "reasoning":
        kwargs["answer_hint"] = cfg.task.ground_truth
    elif cfg.env_kind == "ml":
        kwargs["approach_runtimes"] = {
            key: ap.runtime.seconds for key, ap in cfg.ml_task.approaches.items()
        }
    return Observation(**kwargs)


def dispatch_tool(ep: _Episode, call: dict) -> tuple[ToolResult, Duration]:
    """Route one tool call; returns the result and its sampled latency."""
    cfg = ep.config
    name = call.get("name", "")
    args = call.get("arguments") or {}
    surface = TOOL_SURFACES[cfg.env_kind]
    if name not in surface:
        return (
            ToolResult(text=f"Tool error: unknown tool {name!r} for {cfg.env_kind} tasks."),
            cfg.query_latency,
        )
    if not isinstance(args, dict):
        return ToolResult(text="Tool error: arguments must be an object."), cfg.query_latency

    if name == "get_duration":
        # Report reflects the ledger as of this call, i.e. before this
        # step's own time lands; the post-append sentence is added later.
        reported = ep.registry.get_duration(cfg.session_id)
        return ToolResult(text=f"{format_report_seconds(reported)} seconds."), cfg.query_latency

    if cfg.env_kind == "game":
        return _dispatch_game_tool(ep, name, args)
    if cfg.env_kind == "ml":
        if name == "execute_code_and_get_duration":
            result = envsim.ml_execute(cfg.ml_task, str(args.get("code", "")))
            if result.accuracy is not None:
                best = ep.best_ml_accuracy
                ep.best_ml_accuracy = result.accuracy if best is None else max(best, result.accuracy)
                text = (
                    f"Code execution succeeded. Stdout: {result.text} "
                    f"Evaluation accuracy: {result.accuracy:.4f}."
                )
            else:
                text = result.text
            return ToolResult(
                text=text, tool_latency=result.tool_latency, accuracy=result.accuracy
            ), result.tool_latency
    raise AssertionError(f"unroutable tool {name!r}")  # surface check above is exhaustive


def _dispatch_game_tool(ep: _Episode, name: str, args: dict) -> tuple[ToolResult, Duration]:
    cfg = ep.config
    spec = cfg.game
    state = ep.game_state
    if state.ended and name != "get_score":
        return ToolResult(text="Tool error: the game is over."), cfg.query_latency
    if name == "get_score":
        return ToolResult(text=f"Your current score is: {state.score}."), cfg.query_latency
    if name == "get_max_score":
        return ToolResult(text=f"The max score is {spec.max_score}."), cfg.query_latency
    if name == "get_available_actions":
        actions = envsim.valid_actions(spec, state)
        return ToolResult(text=f"Available actions: {actions!r}."), cfg.query_latency
    if name == "end_game":
        ep.game_state = envsim.end_game(state)
        return (
            ToolResult(text=f"Game ended. Final score: {ep.game_state.score}.", terminal=True),
            cfg.query_latency,
        )
    # step(action): the one game tool that draws from the latency model
    action = str(args.get("action", ""))
    new_state, result = envsim.game_step(spec, state, action)
    ep.game_state = new_state
    latency = sample_latency(cfg.latency, "step", ep.rng)
    return (
        ToolResult(
            text=result.text,
            score_delta=result.score_delta,
            terminal=result.terminal,
        ),
        latency,
    )


def _finalize(ep: _Episode, termination: str, error: Optional[str] = None) -> SessionResult:
    cfg = ep.config
    effective = ep.effective()
    on_time = check_budget(effective, ep.t_max) is BudgetStatus.WITHIN

    if cfg.env_kind == "reasoning":
        correct = ep.answer_text is not None and envsim.verify_answer(cfg.task, ep.answer_text)
        raw = 1.0 if correct else 0.0
        r = reward_mod.reasoning_accuracy(correct)
        final_score = None
    elif cfg.env_kind == "game":
        final_score = ep.game_state.score
        raw = min(max(final_score, 0), cfg.game.max_score) / cfg.game.max_score
        r = reward_mod.game_accuracy(final_score, cfg.game.max_score)
    else:
        raw = ep.best_ml_accuracy or 0.0
        r = reward_mod.ml_accuracy_component(raw)
        final_score = None

    if termination == "policy_error":
        r = 0.0
        raw = 0.0
    outcome = reward_mod.compute_reward(effective, r, ep.t_max, cfg.reward_params)
    if termination == "policy_error" and outcome.total != 0.0:
        outcome = RewardOutcome(0.0, 0.0, 0.0, 0.0, on_time=outcome.on_time)
    if cfg.strict_format and not ep.saw_conclusion and outcome.total != 0.0:
        # strict mode: the duration tag is mandatory for earning any reward
        outcome = RewardOutcome(0.0, 0.0, 0.0, 0.0, on_time=outcome.on_time)

    within_steps = 0
    for n in range(1, len(ep.ledger.steps) + 1):
        prefix = effective_total(TimeLedger(ep.ledger.steps[:n]), ep.alpha)
        if prefix <= ep.t_max:
            within_steps += 1

    result = SessionResult(
        ledger=ep.ledger,
        effective_time=effective,
        t_max=ep.t_max,
        on_time=on_time,
        termination=termination,
        raw_accuracy=raw,
        final_score=final_score,
        steps=len(ep.ledger),
        within_budget_steps=within_steps,
        reward=outcome,
        trace=(),
        error=error,
    )
    ep.record("session_end", result.summary_json())
    return dataclasses.replace(result, trace=tuple(ep.trace))


def run_session(
    policy: Policy,
    config: SessionConfig,
    registry: TimerRegistry | None = None,
) -> SessionResult:
    """Run one budgeted episode to termination. Never raises for policy faults."""
    ep = _Episode(policy, config, registry)
    ep.registry.register(config.session_id, config.timer, lambda: ep.ledger)
    try:
        return _run_loop(ep)
    finally:
        ep.registry.unregister(config.session_id)


def _run_loop(ep: _Episode) -> SessionResult:
    cfg = ep.config
    ep.record("session_start", cfg.resolved_json())
    obs = _make_observation(ep, _initial_text(cfg, ep.t_max))

    for _turn in range(cfg.max_steps):
        try:
            output = ep.policy.step(obs)
        except Exception as exc:  # policy faults are results, not crashes
            ep.record("policy_turn", {"error": str(exc)})
            return _finalize(ep, "policy_error", error=str(exc))

        gen = output.declared_gen_time
        tags = parse_tags(output.body)
        if tags.conclusion_duration is not None:
            ep.saw_conclusion = True
        if tags.answer is not None:
            ep.answer_text = tags.answer
        ep.record(
            "policy_turn",
            {
                "declared_gen_time_us": gen.micros,
                "body": output.body,
                "tool_call": output.tool_call,
            },
        )
        ep.sleep_if_real(gen)

        terminal = False
        if output.tool_call is not None:
            ep.record("tool_call", dict(output.tool_call))
            result, latency = dispatch_tool(ep, output.tool_call)
            ep.ledger = ledger_append(ep.ledger, gen, latency)
            ep.sleep_if_real(latency)
            text = result.text
            if cfg.env_kind == "game":
                played = ep.registry.get_duration(cfg.session_id)
                text = f"{text} You have played for {format_report_seconds(played)} seconds."
            elif cfg.env_kind == "ml" and result.accuracy is not None:
                spent = ep.registry.get_duration(cfg.session_id)
                text = f"{text} You have spent {format_report_seconds(spent)} seconds."
            ep.record(
                "tool_response",
                {
                    "name": output.tool_call.get("name"),
                    "text": text,
                    "tool_latency_us": latency.micros,
                    "accuracy": result.accuracy,
                },
            )
            terminal = result.terminal or (ep.game_state is not None and ep.game_state.ended)
            reported = _extract_reported_seconds(text)
            next_obs_args = dict(text=text, reported=reported, tool_text=text,
                                 tool_accuracy=result.accuracy)
        else:
            ep.ledger = ledger_append(ep.ledger, gen, ZERO)
            next_obs_args = dict(text="")

        effective = ep.effective()
        status = check_budget(effective, ep.t_max)
        ep.record("budget_check", {"status": status.value, "t_max_us": ep.t_max.micros})
        if status is BudgetStatus.EXCEEDED:
            return _finalize(ep, "budget_exceeded")
        if output.tool_call is None and tags.any_final():
            return _finalize(ep, "final_answer")
        if terminal:
            return _finalize(ep, "env_terminal")
        obs = _make_observation(ep, **next_obs_args)

    return _finalize(ep, "step_cap")


_REPORTED_RE = re.compile(
    r"(?:You have played for |You have spent |^)([0-9]+\.[0-9]{2}) seconds\."
)


def _extract_reported_seconds(text: str) -> Optional[float]:
    match = _REPORTED_RE.search(text)
    return float(match.group(1)) if match else None
