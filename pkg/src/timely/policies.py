"""Built-in scripted policies: deterministic-for-seed synthetic agents that
stand in for models of different speeds and interaction quality."""

from __future__ import annotations

from typing import Optional, Sequence

from .session import Observation, PolicyOutput
from .timecore import Duration, SeededRng, ZERO


def _tool(name: str, **arguments) -> dict:
    return {"name": name, "arguments": arguments}


class SyntheticGamePolicy:
    """Plays a game with configured speed and decision quality.

    Each turn, with probability quality_q the policy takes the annotated
    score-maximizing action, otherwise a uniformly random other action.
    Ends the game when no scoring path remains.
    """

    def __init__(self, gen_time: Duration, quality_q: float, seed: int = 0):
        if not 0.0 <= quality_q <= 1.0:
            raise ValueError("quality_q must be in [0, 1]")
        self.gen_time = gen_time
        self.quality_q = quality_q
        self.rng = SeededRng(seed)

    def step(self, obs: Observation) -> PolicyOutput:
        if obs.best_action is None:
            return PolicyOutput(self.gen_time, "", _tool("end_game"))
        if self.rng.random() < self.quality_q:
            action = obs.best_action
        else:
            others = [a for a in obs.valid_actions if a != obs.best_action]
            action = self.rng.choice(others) if others else obs.best_action
        return PolicyOutput(self.gen_time, "", _tool("step", action=action))


class BudgetAwarePolicy:
    """Alternates elapsed-time probes with task actions and concludes once
    the reported time crosses (1 - safety_margin) of the budget."""

    def __init__(self, gen_time: Duration, safety_margin: float):
        if not 0.0 < safety_margin < 1.0:
            raise ValueError("safety_margin must be in (0, 1)")
        self.gen_time = gen_time
        self.safety_margin = safety_margin
        self.last_reported: Optional[float] = None
        self.probe_next = True

    def _conclusion(self) -> str:
        reported = self.last_reported if self.last_reported is not None else 0.0
        return f"<conclusion>total duration: {reported:.2f} seconds</conclusion>"

    def step(self, obs: Observation) -> PolicyOutput:
        if obs.reported_seconds is not None:
            self.last_reported = obs.reported_seconds

        threshold = (1.0 - self.safety_margin) * obs.budget_seconds
        if self.last_reported is not None and self.last_reported >= threshold:
            body = self._conclusion()
            if obs.kind == "reasoning":
                answer = obs.answer_hint if obs.answer_hint is not None else "unknown"
                body = f"<answer>\\boxed{{{answer}}}</answer>" + body
            elif obs.kind == "game":
                body = f"<score>{obs.score or 0}</score>" + body
            elif obs.kind == "ml":
                body = "<accuracy>0.0</accuracy>" + body
            return PolicyOutput(self.gen_time, body)

        if self.probe_next:
            self.probe_next = False
            return PolicyOutput(self.gen_time, "", _tool("get_duration"))
        self.probe_next = True
        if obs.kind == "game":
            action = obs.best_action or (obs.valid_actions[0] if obs.valid_actions else None)
            if action is None:
                return PolicyOutput(self.gen_time, "", _tool("end_game"))
            return PolicyOutput(self.gen_time, "", _tool("step", action=action))
        # reasoning/ml: a bare reasoning turn between probes
        return PolicyOutput(self.gen_time, "Working through the problem.")


class MlLadderPolicy:
    """Submits approaches in sequence, probing elapsed time before each
    submission and stopping when the next runtime will not fit."""

    def __init__(self, approaches: Sequence[str], gen_time: Duration, pad_seconds: float = 3.0):
        self.ladder = list(approaches)
        self.gen_time = gen_time
        # covers the probe reading's one-step lag plus the concluding turn
        self.pad_seconds = pad_seconds
        self.index = 0
        self.best: Optional[float] = None
        self.last_reported: float = 0.0
        self.probe_next = True

    def _conclusion(self) -> str:
        best = self.best if self.best is not None else 0.0
        return (
            f"<accuracy>{best}</accuracy>"
            f"<conclusion>total duration: {self.last_reported:.2f} seconds</conclusion>"
        )

    def step(self, obs: Observation) -> PolicyOutput:
        if obs.reported_seconds is not None:
            self.last_reported = obs.reported_seconds
        if obs.tool_accuracy is not None:
            self.best = obs.tool_accuracy if self.best is None else max(self.best, obs.tool_accuracy)

        if self.index >= len(self.ladder):
            return PolicyOutput(self.gen_time, self._conclusion())
        if self.probe_next:
            self.probe_next = False
            return PolicyOutput(self.gen_time, "", _tool("get_duration"))
        self.probe_next = True

        key = self.ladder[self.index]
        runtime = obs.approach_runtimes.get(key, 0.0)
        remaining = obs.budget_seconds - self.last_reported
        if runtime + self.gen_time.seconds + self.pad_seconds >= remaining:
            return PolicyOutput(self.gen_time, self._conclusion())
        self.index += 1
        return PolicyOutput(
            self.gen_time,
            "",
            _tool("execute_code_and_get_duration", code=f"#approach: {key}\n"),
        )


class FixedScriptPolicy:
    """Replays a fixed list of outputs; optionally repeats the script forever."""

    def __init__(self, outputs: Sequence[PolicyOutput], repeat: bool = False):
        if not outputs:
            raise ValueError("script must not be empty")
        self.outputs = list(outputs)
        self.repeat = repeat
        self.index = 0

    def step(self, obs: Observation) -> PolicyOutput:
        if self.index >= len(self.outputs):
            if self.repeat:
                self.index = 0
            else:
                # exhausted scripts conclude so the session terminates cleanly
                return PolicyOutput(ZERO, "<conclusion>total duration: 0.00 seconds</conclusion>")
        out = self.outputs[self.index]
        self.index += 1
        return out


def build_policy(spec: dict) -> object:
    """Construct a policy from a config record (see ExperimentPlan)."""
    kind = spec.get("kind")
    if kind == "synthetic_game":
        return SyntheticGamePolicy(
            gen_time=Duration(int(spec["gen_time_us"])),
            quality_q=float(spec["quality_q"]),
            seed=int(spec.get("seed", 0)),
        )
    if kind == "budget_aware":
        return BudgetAwarePolicy(
            gen_time=Duration(int(spec["gen_time_us"])),
            safety_margin=float(spec["safety_margin"]),
        )
    if kind == "ml_ladder":
        return MlLadderPolicy(
            approaches=list(spec["approaches"]),
            gen_time=Duration(int(spec["gen_time_us"])),
            pad_seconds=float(spec.get("pad_seconds", 3.0)),
        )
    if kind == "fixed_script":
        return FixedScriptPolicy(
            outputs=[PolicyOutput.from_json(o) for o in spec["outputs"]],
            repeat=bool(spec.get("repeat", False)),
        )
    raise ValueError(f"unknown policy kind: {kind!r}")
