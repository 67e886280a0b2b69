"""Per-session elapsed-time reporting: the get_duration tool backend.

Each session registers a timer that reads the session's live time ledger
and reports alpha-scaled generation time plus raw tool time, optionally
perturbed by additive jitter. Jitter affects only the report; budget
enforcement and rewards use the unjittered effective time.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .timecore import (
    Seconds,
    SeededRng,
    TimeLedger,
    _to_fraction,
    effective_total,
)


class TimerError(Exception):
    pass


class AlreadyRegisteredError(TimerError):
    pass


class NotRegisteredError(TimerError):
    pass


@dataclass(frozen=True)
class Jitter:
    """Additive report noise in signed microseconds; none or uniform."""

    kind: str = "none"  # none | uniform
    lo_us: int = 0
    hi_us: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "uniform"):
            raise ValueError(f"unknown jitter kind: {self.kind!r}")
        if self.kind == "uniform" and self.lo_us > self.hi_us:
            raise ValueError("uniform jitter requires lo <= hi")

    @classmethod
    def none(cls) -> "Jitter":
        return cls()

    @classmethod
    def uniform(cls, lo_us: int, hi_us: int) -> "Jitter":
        return cls(kind="uniform", lo_us=lo_us, hi_us=hi_us)

    @property
    def bound_us(self) -> int:
        return max(abs(self.lo_us), abs(self.hi_us))

    def to_json(self) -> dict:
        if self.kind == "none":
            return {"kind": "none"}
        return {"kind": "uniform", "lo_us": self.lo_us, "hi_us": self.hi_us}

    @classmethod
    def from_json(cls, obj: dict) -> "Jitter":
        if obj.get("kind", "none") == "none":
            return cls.none()
        return cls.uniform(int(obj["lo_us"]), int(obj["hi_us"]))


@dataclass(frozen=True)
class TimerConfig:
    alpha: Fraction = Fraction(1)
    jitter: Jitter = Jitter.none()
    seed: int = 0

    @classmethod
    def of(cls, alpha: Seconds = 1, jitter: Jitter | None = None, seed: int = 0) -> "TimerConfig":
        alpha_f = _to_fraction(alpha)
        if alpha_f <= 0:
            raise ValueError("alpha must be positive")
        return cls(alpha=alpha_f, jitter=jitter or Jitter.none(), seed=seed)

    def to_json(self) -> dict:
        return {"alpha": str(self.alpha), "jitter": self.jitter.to_json(), "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "TimerConfig":
        return cls.of(
            alpha=Fraction(obj.get("alpha", 1)),
            jitter=Jitter.from_json(obj.get("jitter", {"kind": "none"})),
            seed=int(obj.get("seed", 0)),
        )


class _Entry:
    __slots__ = ("config", "ledger_ref", "rng")

    def __init__(self, config: TimerConfig, ledger_ref: Callable[[], TimeLedger]):
        self.config = config
        self.ledger_ref = ledger_ref
        self.rng = SeededRng(config.seed)


class TimerRegistry:
    """Session-id keyed timers; safe for concurrent sessions, isolated per entry."""

    def __init__(self) -> None:
        self._entries: dict[str, _Entry] = {}
        self._lock = threading.Lock()

    def register(
        self, session_id: str, config: TimerConfig, ledger_ref: Callable[[], TimeLedger]
    ) -> None:
        with self._lock:
            if session_id in self._entries:
                raise AlreadyRegisteredError(f"session already registered: {session_id!r}")
            self._entries[session_id] = _Entry(config, ledger_ref)

    def unregister(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._entries:
                raise NotRegisteredError(f"session not registered: {session_id!r}")
            del self._entries[session_id]

    def __len__(self) -> int:
        return len(self._entries)

    def get_duration(self, session_id: str) -> float:
        """Reported elapsed seconds: max(0, alpha*gen + tool + jitter draw)."""
        with self._lock:
            entry = self._entries.get(session_id)
        if entry is None:
            raise NotRegisteredError(f"session not registered: {session_id!r}")
        effective_us = effective_total(entry.ledger_ref(), entry.config.alpha).micros
        jitter = entry.config.jitter
        if jitter.kind == "uniform":
            effective_us += entry.rng.randint(jitter.lo_us, jitter.hi_us)
        return max(0, effective_us) / 1_000_000


def format_report_seconds(seconds: float) -> str:
    """Tool-response rendering: two decimal places."""
    return f"{seconds:.2f}"
