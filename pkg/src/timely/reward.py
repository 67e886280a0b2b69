"""Time-aware episode reward: piecewise total, utilization bonus, task transforms.

The total is zero past the deadline, a small format reward for on-time but
incorrect episodes, and format + accuracy + a saturating time-utilization
bonus otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .timecore import Duration

DEFAULT_FORMAT_REWARD = 0.1
DEFAULT_UTILIZATION_WEIGHT = 0.4

TASK_KINDS = ("reasoning", "game", "ml")


@dataclass(frozen=True)
class RewardParams:
    r_f: float = DEFAULT_FORMAT_REWARD
    lam: float = DEFAULT_UTILIZATION_WEIGHT
    task_kind: str = "reasoning"

    def __post_init__(self) -> None:
        if self.r_f < 0 or self.lam < 0:
            raise ValueError("reward parameters must be non-negative")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind: {self.task_kind!r}")

    def to_json(self) -> dict:
        return {"r_f": self.r_f, "lambda": self.lam, "task_kind": self.task_kind}

    @classmethod
    def from_json(cls, obj: dict) -> "RewardParams":
        return cls(
            r_f=float(obj.get("r_f", DEFAULT_FORMAT_REWARD)),
            lam=float(obj.get("lambda", DEFAULT_UTILIZATION_WEIGHT)),
            task_kind=obj.get("task_kind", "reasoning"),
        )


@dataclass(frozen=True)
class RewardOutcome:
    total: float
    format: float
    accuracy: float
    utilization: float
    on_time: bool

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "components": {
                "format": self.format,
                "accuracy": self.accuracy,
                "utilization": self.utilization,
            },
            "on_time": self.on_time,
        }


def utilization(t: Duration, t_max: Duration) -> float:
    """sin((pi/2) * min(t/t_max, 1)): monotone, concave, saturates at 1."""
    if t_max.micros <= 0:
        raise ValueError("t_max must be positive")
    ratio = min(t.micros / t_max.micros, 1.0)
    return math.sin(math.pi / 2 * ratio)


def compute_reward(
    t: Duration, r: float, t_max: Duration, params: RewardParams
) -> RewardOutcome:
    """Piecewise reward over (time spent, accuracy reward r in [0, 1])."""
    if t_max.micros <= 0:
        raise ValueError("t_max must be positive")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"accuracy reward must be in [0, 1], got {r}")
    if t > t_max:
        return RewardOutcome(0.0, 0.0, 0.0, 0.0, on_time=False)
    if r == 0.0:
        return RewardOutcome(params.r_f, params.r_f, 0.0, 0.0, on_time=True)
    u = params.lam * utilization(t, t_max)
    return RewardOutcome(params.r_f + r + u, params.r_f, r, u, on_time=True)


def game_accuracy(s_curr: int, s_max: int) -> float:
    """Cube-root of the clamped score ratio; negative scores clamp to zero."""
    if s_max <= 0:
        raise ValueError("maximum score must be positive")
    ratio = min(max(s_curr, 0), s_max) / s_max
    return ratio ** (1 / 3)


def ml_accuracy_component(accuracy: float) -> float:
    """Halved evaluation accuracy, balancing the reward magnitude for ML tasks."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must be in [0, 1], got {accuracy}")
    return 0.5 * accuracy


def reasoning_accuracy(correct: bool) -> float:
    """Fixed accuracy reward for reasoning tasks: 0.5 if correct else 0."""
    return 0.5 if correct else 0.0
