"""Exact virtual-time arithmetic: durations, step ledgers, latency models, budgets.

All time quantities are integer microseconds so that ledger identities and
golden traces are exact. Floating point only appears at display boundaries.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

MICROS_PER_SECOND = 1_000_000

# Durations are conceptually 64-bit; Python ints never wrap, so we enforce
# the bound explicitly instead of overflowing silently.
MAX_MICROS = 2**63 - 1

Seconds = Union[int, float, str, Fraction]


class DurationOverflowError(ArithmeticError):
    """Total time exceeded the representable range."""


def _round_half_away(x: Fraction) -> int:
    """Round to nearest integer, ties away from zero."""
    num, den = x.numerator, x.denominator
    if num >= 0:
        return (2 * num + den) // (2 * den)
    return -((-2 * num + den) // (2 * den))


def _to_fraction(value: Seconds) -> Fraction:
    # str(float) keeps the decimal literal the caller wrote, so 5.31s maps
    # to exactly 5_310_000 micros instead of the nearest binary float.
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True, order=True)
class Duration:
    """A non-negative span of virtual time, in integer microseconds."""

    micros: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.micros, int):
            raise TypeError(f"micros must be int, got {type(self.micros).__name__}")
        if self.micros < 0:
            raise ValueError(f"duration cannot be negative: {self.micros}")
        if self.micros > MAX_MICROS:
            raise DurationOverflowError(f"duration overflow: {self.micros}")

    @classmethod
    def from_seconds(cls, seconds: Seconds) -> "Duration":
        return cls(_round_half_away(_to_fraction(seconds) * MICROS_PER_SECOND))

    @property
    def seconds(self) -> float:
        return self.micros / MICROS_PER_SECOND

    def display_seconds(self) -> str:
        """Lossless decimal-seconds rendering (no binary rounding)."""
        whole, frac = divmod(self.micros, MICROS_PER_SECOND)
        if frac == 0:
            return f"{whole}.0"
        return f"{whole}.{frac:06d}".rstrip("0")

    def __add__(self, other: "Duration") -> "Duration":
        if not isinstance(other, Duration):
            return NotImplemented
        return Duration(self.micros + other.micros)

    def __sub__(self, other: "Duration") -> "Duration":
        if not isinstance(other, Duration):
            return NotImplemented
        if other.micros > self.micros:
            raise ValueError("duration subtraction would go negative")
        return Duration(self.micros - other.micros)

    def __bool__(self) -> bool:
        return self.micros > 0

    def __repr__(self) -> str:
        return f"Duration({self.display_seconds()}s)"


ZERO = Duration(0)


@dataclass(frozen=True)
class StepRecord:
    """One agent step: generation time plus tool time, 1-based index."""

    index: int
    t_gen: Duration
    t_tool: Duration

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"step index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class TimeLedger:
    """Ordered per-step time records; all totals derive from the steps."""

    steps: tuple[StepRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)


def ledger_append(ledger: TimeLedger, t_gen: Duration, t_tool: Duration) -> TimeLedger:
    """Return a new ledger with one more step; raises on total-time overflow."""
    new = TimeLedger(ledger.steps + (StepRecord(len(ledger.steps) + 1, t_gen, t_tool),))
    total_time(new)  # force the overflow check now, not at first read
    return new


def total_time(ledger: TimeLedger) -> Duration:
    """Sum of all generation and tool time; zero for an empty ledger."""
    return Duration(sum(s.t_gen.micros + s.t_tool.micros for s in ledger.steps))


def total_gen(ledger: TimeLedger) -> Duration:
    return Duration(sum(s.t_gen.micros for s in ledger.steps))


def total_tool(ledger: TimeLedger) -> Duration:
    return Duration(sum(s.t_tool.micros for s in ledger.steps))


def latency_ratio(step: StepRecord) -> Optional[float]:
    """Per-step tool/generation ratio; None when generation time is zero."""
    if step.t_gen.micros == 0:
        return None
    return step.t_tool.micros / step.t_gen.micros


def weighted_total(ledger: TimeLedger) -> Duration:
    """Total time via the per-step ratio form sum((m_i + 1) * t_gen_i).

    Steps with zero generation time contribute their tool time directly
    (the ratio form is undefined there). Exact rational arithmetic keeps
    the identity with total_time precise at microsecond resolution.
    """
    acc = Fraction(0)
    for s in ledger.steps:
        if s.t_gen.micros == 0:
            acc += s.t_tool.micros
        else:
            m = Fraction(s.t_tool.micros, s.t_gen.micros)
            acc += (m + 1) * s.t_gen.micros
    if acc.denominator != 1:
        raise AssertionError("weighted total must reduce to whole microseconds")
    return Duration(int(acc))


def effective_total(ledger: TimeLedger, alpha: Seconds = 1) -> Duration:
    """Ground-truth session time: alpha-scaled generation plus raw tool time."""
    scaled = _to_fraction(alpha) * total_gen(ledger).micros + total_tool(ledger).micros
    return Duration(_round_half_away(scaled))


def predicted_rounds(budget: Duration, mean_tool: Duration) -> int:
    """Affordable interaction rounds under a budget: floor(budget / mean_tool)."""
    if mean_tool.micros == 0:
        raise ValueError("mean tool time must be positive")
    return budget.micros // mean_tool.micros


class BudgetStatus(enum.Enum):
    WITHIN = "within"
    EXCEEDED = "exceeded"


def check_budget(elapsed: Duration, t_max: Duration) -> BudgetStatus:
    """Boundary counts as within: elapsed == t_max is still on time."""
    return BudgetStatus.WITHIN if elapsed <= t_max else BudgetStatus.EXCEEDED


class SeededRng:
    """Single per-session randomness source; seed-stable and replayable."""

    def __init__(self, seed: int):
        self.seed = seed
        self.draws = 0
        self._rng = random.Random(seed)

    def random(self) -> float:
        self.draws += 1
        return self._rng.random()

    def randint(self, lo: int, hi: int) -> int:
        self.draws += 1
        return self._rng.randint(lo, hi)

    def choice(self, seq: Sequence):
        if not seq:
            raise IndexError("choice from empty sequence")
        self.draws += 1
        return seq[self._rng.randrange(len(seq))]


@dataclass(frozen=True)
class LatencyModel:
    """Injected tool-call latency: none, fixed, uniform range, or per-action map."""

    kind: str  # none | fixed | uniform | per_action
    value: Optional[Duration] = None
    lo: Optional[Duration] = None
    hi: Optional[Duration] = None
    actions: Mapping[str, "LatencyModel"] = field(default_factory=dict)
    default: Optional["LatencyModel"] = None

    @classmethod
    def none(cls) -> "LatencyModel":
        return cls(kind="none")

    @classmethod
    def fixed(cls, value: Duration) -> "LatencyModel":
        return cls(kind="fixed", value=value)

    @classmethod
    def uniform(cls, lo: Duration, hi: Duration) -> "LatencyModel":
        if lo > hi:
            raise ValueError(f"uniform latency requires lo <= hi, got {lo} > {hi}")
        return cls(kind="uniform", lo=lo, hi=hi)

    @classmethod
    def per_action(
        cls, actions: Mapping[str, "LatencyModel"], default: "LatencyModel"
    ) -> "LatencyModel":
        if default is None:
            raise ValueError("per_action latency requires a default model")
        return cls(kind="per_action", actions=dict(actions), default=default)

    def to_json(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        if self.kind == "fixed":
            return {"kind": "fixed", "us": self.value.micros}
        if self.kind == "uniform":
            return {"kind": "uniform", "lo_us": self.lo.micros, "hi_us": self.hi.micros}
        return {
            "kind": "per_action",
            "actions": {k: v.to_json() for k, v in sorted(self.actions.items())},
            "default": self.default.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LatencyModel":
        kind = obj.get("kind")
        if kind == "none":
            return cls.none()
        if kind == "fixed":
            return cls.fixed(Duration(int(obj["us"])))
        if kind == "uniform":
            return cls.uniform(Duration(int(obj["lo_us"])), Duration(int(obj["hi_us"])))
        if kind == "per_action":
            return cls.per_action(
                {k: cls.from_json(v) for k, v in obj.get("actions", {}).items()},
                cls.from_json(obj["default"]),
            )
        raise ValueError(f"unknown latency model kind: {kind!r}")


def sample_latency(model: LatencyModel, action_name: str, rng: SeededRng) -> Duration:
    """Draw one tool latency. Only uniform models consume randomness."""
    if model.kind == "none":
        return ZERO
    if model.kind == "fixed":
        return model.value
    if model.kind == "uniform":
        return Duration(rng.randint(model.lo.micros, model.hi.micros))
    sub = model.actions.get(action_name, model.default)
    return sample_latency(sub, action_name, rng)


@dataclass(frozen=True)
class BudgetSpec:
    """Episode time budget: per-case baseline scaling or step-based multiples."""

    kind: str  # per_case | step_based
    base: Duration  # baseline x (per_case) or mean step time tau (step_based)
    factor: Fraction  # scaling factor n, or step multiple k

    @classmethod
    def per_case(cls, baseline_x: Duration, factor_n: Seconds) -> "BudgetSpec":
        return cls(kind="per_case", base=baseline_x, factor=_to_fraction(factor_n))

    @classmethod
    def step_based(cls, tau: Duration, multiple_k: Seconds) -> "BudgetSpec":
        return cls(kind="step_based", base=tau, factor=_to_fraction(multiple_k))

    def to_json(self) -> dict:
        key = "baseline_x_us" if self.kind == "per_case" else "tau_us"
        factor_key = "factor_n" if self.kind == "per_case" else "multiple_k"
        return {"kind": self.kind, key: self.base.micros, factor_key: str(self.factor)}

    @classmethod
    def from_json(cls, obj: dict) -> "BudgetSpec":
        kind = obj.get("kind")
        if kind == "per_case":
            return cls.per_case(Duration(int(obj["baseline_x_us"])), Fraction(obj["factor_n"]))
        if kind == "step_based":
            return cls.step_based(Duration(int(obj["tau_us"])), Fraction(obj["multiple_k"]))
        raise ValueError(f"unknown budget spec kind: {kind!r}")


def resolve_budget(spec: BudgetSpec) -> Duration:
    """Resolve to a concrete limit; nearest microsecond, ties away from zero."""
    if spec.base.micros <= 0 or spec.factor <= 0:
        raise ValueError("budget parameters must be positive")
    resolved = Duration(_round_half_away(spec.factor * spec.base.micros))
    if resolved.micros <= 0:
        raise ValueError("resolved budget must be positive")
    return resolved
