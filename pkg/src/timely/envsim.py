"""Deterministic task worlds: finite-state text games, timed reasoning tasks,
and an approach-keyed model of ML code execution.

All environment behavior is a pure function of (spec, state, action); the
only randomness in an episode lives in latency models and policies.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping, Optional

from .timecore import Duration

NOTHING_HAPPENS = "Nothing happens."


class EnvError(Exception):
    pass


class SpecValidationError(EnvError):
    pass


class GameOverError(EnvError):
    pass


def normalize_phrase(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip()).casefold()


@dataclass(frozen=True)
class Transition:
    next: str
    score_delta: int = 0
    message: str = ""
    once: bool = False


@dataclass(frozen=True)
class GameStateSpec:
    description: str
    transitions: Mapping[str, Transition]  # insertion order = spec order
    terminal: bool = False
    best_action: Optional[str] = None  # scripted-policy affordance only


@dataclass(frozen=True)
class GameSpec:
    name: str
    states: Mapping[str, GameStateSpec]
    start: str
    max_score: int


@dataclass(frozen=True)
class GameState:
    current: str
    score: int = 0
    fired_once: frozenset = frozenset()
    steps_taken: int = 0
    ended: bool = False


@dataclass(frozen=True)
class ReasoningTask:
    id: str
    prompt: str
    ground_truth: str
    baseline_x: Duration

    def __post_init__(self) -> None:
        if not self.ground_truth:
            raise SpecValidationError(f"task {self.id!r} has empty ground truth")
        if self.baseline_x.micros <= 0:
            raise SpecValidationError(f"task {self.id!r} needs positive baseline")


@dataclass(frozen=True)
class MLApproach:
    accuracy: float
    runtime: Duration
    stdout: str


@dataclass(frozen=True)
class MLTaskModel:
    id: str
    prompt: str
    approaches: Mapping[str, MLApproach]
    error_text: str
    error_runtime: Duration


@dataclass(frozen=True)
class ToolResult:
    text: str
    tool_latency: Duration = Duration(0)
    score_delta: int = 0
    terminal: bool = False
    accuracy: Optional[float] = None


def load_game_spec(data: bytes | str) -> GameSpec:
    """Parse and validate a game spec document."""
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"malformed game spec at line {exc.lineno}: {exc.msg}") from exc
    return game_spec_from_json(obj)


def game_spec_from_json(obj: dict) -> GameSpec:
    name = obj.get("name", "")
    raw_states = obj.get("states") or {}
    if not raw_states:
        raise SpecValidationError(f"game {name!r}: states map is empty")
    max_score = obj.get("max_score", 0)
    if not isinstance(max_score, int) or max_score <= 0:
        raise SpecValidationError(f"game {name!r}: max_score must be a positive integer")

    states: dict[str, GameStateSpec] = {}
    for sid, raw in raw_states.items():
        transitions = {}
        for phrase, tr in (raw.get("transitions") or {}).items():
            transitions[normalize_phrase(phrase)] = Transition(
                next=tr["next"],
                score_delta=int(tr.get("score_delta", 0)),
                message=tr.get("message", NOTHING_HAPPENS),
                once=bool(tr.get("once", False)),
            )
        best = raw.get("best_action")
        states[sid] = GameStateSpec(
            description=raw.get("description", ""),
            transitions=transitions,
            terminal=bool(raw.get("terminal", False)),
            best_action=normalize_phrase(best) if best else None,
        )

    start = obj.get("start")
    if start not in states:
        raise SpecValidationError(f"game {name!r}: start state {start!r} does not exist")
    for sid, state in states.items():
        for phrase, tr in state.transitions.items():
            if tr.next not in states:
                raise SpecValidationError(
                    f"game {name!r}: state {sid!r} action {phrase!r} targets "
                    f"missing state {tr.next!r}"
                )
        if state.best_action is not None and state.best_action not in state.transitions:
            raise SpecValidationError(
                f"game {name!r}: state {sid!r} best_action {state.best_action!r} "
                "is not a transition"
            )

    # Reachability proxy for the max score: either some repeatable positive
    # transition exists, or one-shot positive deltas alone can add up to it.
    once_sum = sum(
        tr.score_delta
        for state in states.values()
        for tr in state.transitions.values()
        if tr.once and tr.score_delta > 0
    )
    repeatable = any(
        tr.score_delta > 0 and not tr.once
        for state in states.values()
        for tr in state.transitions.values()
    )
    if not repeatable and once_sum < max_score:
        raise SpecValidationError(
            f"game {name!r}: max_score {max_score} unreachable "
            f"(one-shot positive deltas sum to {once_sum})"
        )
    return GameSpec(name=name, states=states, start=start, max_score=max_score)


def initial_state(spec: GameSpec) -> GameState:
    return GameState(current=spec.start)


def _clamp_score(score: int, max_score: int) -> int:
    return min(max(score, 0), max_score)


def game_step(spec: GameSpec, state: GameState, action: str) -> tuple[GameState, ToolResult]:
    """Apply one action; unmatched actions are a no-op with a fixed message."""
    if state.ended:
        raise GameOverError("cannot step an ended game")
    phrase = normalize_phrase(action)
    node = spec.states[state.current]
    tr = node.transitions.get(phrase)
    if tr is None:
        new_state = replace(state, steps_taken=state.steps_taken + 1)
        return new_state, ToolResult(text=NOTHING_HAPPENS)
    key = (state.current, phrase)
    delta = tr.score_delta
    fired = state.fired_once
    if tr.once:
        if key in fired:
            delta = 0
        else:
            fired = fired | {key}
    score = _clamp_score(state.score + delta, spec.max_score)
    applied = score - state.score
    terminal = spec.states[tr.next].terminal
    new_state = GameState(
        current=tr.next,
        score=score,
        fired_once=fired,
        steps_taken=state.steps_taken + 1,
        ended=terminal,
    )
    return new_state, ToolResult(text=tr.message, score_delta=applied, terminal=terminal)


def valid_actions(spec: GameSpec, state: GameState) -> list[str]:
    """Transition phrases of the current state, in spec order."""
    if state.ended:
        raise GameOverError("cannot query actions of an ended game")
    if spec.states[state.current].terminal:
        return []
    return list(spec.states[state.current].transitions)


def best_action(spec: GameSpec, state: GameState) -> Optional[str]:
    """Fixture affordance for scripted policies; not part of the tool surface."""
    if state.ended:
        return None
    return spec.states[state.current].best_action


def game_score(state: GameState) -> int:
    return state.score


def game_max_score(spec: GameSpec) -> int:
    return spec.max_score


def end_game(state: GameState) -> GameState:
    if state.ended:
        return state
    return replace(state, ended=True)


_BOXED_RE = re.compile(r"\\boxed\{([^{}]*)\}")


def verify_answer(task: ReasoningTask, answer_text: str) -> bool:
    """Normalized exact match against ground truth; boxed content wins if present."""
    match = _BOXED_RE.search(answer_text or "")
    candidate = match.group(1) if match else (answer_text or "")
    truth = task.ground_truth
    truth_match = _BOXED_RE.search(truth)
    if truth_match:
        truth = truth_match.group(1)
    return normalize_phrase(candidate) == normalize_phrase(truth)


_APPROACH_RE = re.compile(r"^\s*#approach:\s*(\S+)", re.MULTILINE)


def ml_execute(model: MLTaskModel, payload: str) -> ToolResult:
    """Simulated code execution keyed by a '#approach: <key>' directive line."""
    match = _APPROACH_RE.search(payload or "")
    approach = model.approaches.get(match.group(1)) if match else None
    if approach is None:
        return ToolResult(text=model.error_text, tool_latency=model.error_runtime)
    return ToolResult(
        text=approach.stdout,
        tool_latency=approach.runtime,
        accuracy=approach.accuracy,
    )


def reasoning_task_from_json(obj: dict) -> ReasoningTask:
    return ReasoningTask(
        id=obj["id"],
        prompt=obj["prompt"],
        ground_truth=obj["ground_truth"],
        baseline_x=Duration(int(obj["baseline_x_us"])),
    )


def load_reasoning_tasks(data: bytes | str) -> list[ReasoningTask]:
    """JSON lines, one task per line."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    tasks = []
    for i, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            tasks.append(reasoning_task_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise SpecValidationError(f"bad reasoning task on line {i}: {exc}") from exc
    return tasks


def ml_task_from_json(obj: dict) -> MLTaskModel:
    approaches = {
        key: MLApproach(
            accuracy=float(raw["accuracy"]),
            runtime=Duration(int(raw["runtime_us"])),
            stdout=raw.get("stdout", ""),
        )
        for key, raw in (obj.get("approaches") or {}).items()
    }
    if not approaches:
        raise SpecValidationError(f"ml task {obj.get('id')!r} has no approaches")
    for key, approach in approaches.items():
        if approach.runtime.micros <= 0:
            raise SpecValidationError(f"ml approach {key!r} needs positive runtime")
        if not 0.0 <= approach.accuracy <= 1.0:
            raise SpecValidationError(f"ml approach {key!r} accuracy out of range")
    default = obj.get("default_on_unknown") or {}
    return MLTaskModel(
        id=obj["id"],
        prompt=obj.get("prompt", ""),
        approaches=approaches,
        error_text=default.get("error_text", "Code execution failed."),
        error_runtime=Duration(int(default.get("runtime_us", 1_000_000))),
    )


def load_ml_task(data: bytes | str) -> MLTaskModel:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"malformed ml task at line {exc.lineno}: {exc.msg}") from exc
    return ml_task_from_json(obj)


# -- bundled fixtures ---------------------------------------------------------

GAME_FIXTURES = ("mini-zork", "mini-detective", "mini-advent", "mini-enchanter")
ML_FIXTURES = (
    "leaf_classification",
    "spaceship_titanic",
    "random_acts_of_pizza",
    "detecting_insults",
)


def _fixture_bytes(relpath: str) -> bytes:
    return resources.files("timely").joinpath("fixtures", *relpath.split("/")).read_bytes()


def load_fixture_game(name: str) -> GameSpec:
    return load_game_spec(_fixture_bytes(f"games/{name}.json"))


def load_fixture_ml_task(name: str) -> MLTaskModel:
    return load_ml_task(_fixture_bytes(f"ml/{name}.json"))


def load_fixture_reasoning_tasks() -> list[ReasoningTask]:
    return load_reasoning_tasks(_fixture_bytes("reasoning/tasks.jsonl"))
