"""Experiment planning, seeded sweeps, metrics, and report emission.

A plan is a grid over (environment, policy, latency regime, budget multiple);
every cell runs a fixed number of seeded episodes in virtual time. Cell seeds
derive from the base seed and the cell coordinates with a splitmix64-style
mix, so adding a cell never perturbs the others.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import envsim, policies
from .reward import RewardParams
from .session import SessionConfig, SessionResult, run_session, serialize_trace
from .timecore import BudgetSpec, Duration, LatencyModel
from .timerlink import TimerConfig

_MASK64 = (1 << 64) - 1


def mix_seed(base_seed: int, *coords: int) -> int:
    """Stable 64-bit seed derivation from (base seed, cell coordinates)."""
    h = base_seed & _MASK64

    def _splitmix(x: int) -> int:
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
        return x ^ (x >> 31)

    for c in coords:
        h = _splitmix(h ^ ((c + 1) * 0xD6E8FEB86659FD93 & _MASK64))
    return h


@dataclass(frozen=True)
class EnvRef:
    kind: str  # game | reasoning | ml
    name: str  # fixture name or task id

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name}

    @classmethod
    def from_json(cls, obj: dict) -> "EnvRef":
        return cls(kind=obj["kind"], name=obj["name"])


@dataclass(frozen=True)
class Regime:
    name: str
    model: LatencyModel

    def to_json(self) -> dict:
        return {"name": self.name, "model": self.model.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Regime":
        return cls(name=obj["name"], model=LatencyModel.from_json(obj["model"]))


# The conventional four regimes: none / ~2s / ~10s / ~50s injected latency.
STANDARD_REGIMES = (
    Regime("none", LatencyModel.none()),
    Regime("low", LatencyModel.fixed(Duration.from_seconds(2))),
    Regime("medium", LatencyModel.fixed(Duration.from_seconds(10))),
    Regime("high", LatencyModel.fixed(Duration.from_seconds(50))),
)


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    envs: tuple[EnvRef, ...]
    policies: tuple[dict, ...]  # policy spec records with a "name" key
    latency_regimes: tuple[Regime, ...]
    budget_multiples: tuple[Fraction, ...]
    episodes_per_cell: int
    base_seed: int
    step_tau: Duration = Duration.from_seconds(10)  # step-based budget unit
    timer: TimerConfig = TimerConfig()
    reward_params: Optional[RewardParams] = None  # default: per env kind
    max_steps: int = 400
    query_latency_us: int = 500_000

    def __post_init__(self) -> None:
        if not (self.envs and self.policies and self.latency_regimes and self.budget_multiples):
            raise ValueError("plan lists must be non-empty")
        if self.episodes_per_cell < 1:
            raise ValueError("episodes_per_cell must be >= 1")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentPlan":
        return cls(
            name=obj["name"],
            envs=tuple(EnvRef.from_json(e) for e in obj["envs"]),
            policies=tuple(obj["policies"]),
            latency_regimes=tuple(Regime.from_json(r) for r in obj["latency_regimes"]),
            budget_multiples=tuple(Fraction(str(m)) for m in obj["budget_multiples"]),
            episodes_per_cell=int(obj["episodes_per_cell"]),
            base_seed=int(obj["base_seed"]),
            step_tau=Duration(int(obj.get("step_tau_us", 10_000_000))),
            timer=TimerConfig.from_json(obj.get("timer", {})),
            max_steps=int(obj.get("max_steps", 400)),
            query_latency_us=int(obj.get("query_latency_us", 500_000)),
        )


@dataclass(frozen=True)
class CellCoords:
    env: str
    policy: str
    regime: str
    budget_multiple: str

    def key(self) -> tuple:
        return (self.env, self.policy, self.regime, self.budget_multiple)

    def slug(self) -> str:
        return f"{self.env}.{self.policy}.{self.regime}.b{self.budget_multiple}".replace(
            "/", "-"
        )


@dataclass(frozen=True)
class CellResult:
    coords: CellCoords
    episodes: tuple[SessionResult, ...]

    @property
    def mean_score(self) -> float:
        return statistics.fmean(ep.final_score or 0 for ep in self.episodes)

    @property
    def mean_reward(self) -> float:
        return statistics.fmean(ep.reward.total for ep in self.episodes)

    @property
    def mean_accuracy(self) -> float:
        """Raw accuracy with over-budget episodes counted as incorrect."""
        return statistics.fmean(
            ep.raw_accuracy if ep.on_time else 0.0 for ep in self.episodes
        )

    @property
    def on_time_rate_value(self) -> float:
        return on_time_rate(self.episodes)

    @property
    def mean_steps(self) -> float:
        return statistics.fmean(ep.steps for ep in self.episodes)

    @property
    def mean_effective_seconds(self) -> float:
        return statistics.fmean(ep.effective_time.seconds for ep in self.episodes)

    def aggregates(self) -> dict:
        return {
            "episodes": len(self.episodes),
            "mean_score": self.mean_score,
            "mean_reward": self.mean_reward,
            "mean_accuracy": self.mean_accuracy,
            "on_time_rate": self.on_time_rate_value,
            "mean_steps": self.mean_steps,
            "mean_effective_s": self.mean_effective_seconds,
        }


def on_time_rate(results: Sequence[SessionResult]) -> float:
    if not results:
        raise ValueError("on_time_rate needs at least one result")
    return sum(1 for r in results if r.on_time) / len(results)


def accuracy_over_budgets(per_budget: dict) -> float:
    """Unweighted mean of accuracies over budget multiples."""
    if not per_budget:
        raise ValueError("accuracy_over_budgets needs a non-empty map")
    return statistics.fmean(per_budget.values())


def score_over_settings(per_setting: dict) -> float:
    """Unweighted mean of scores over settings."""
    if not per_setting:
        raise ValueError("score_over_settings needs a non-empty map")
    return statistics.fmean(per_setting.values())


def _load_env(ref: EnvRef):
    if ref.kind == "game":
        return envsim.load_fixture_game(ref.name)
    if ref.kind == "ml":
        return envsim.load_fixture_ml_task(ref.name)
    if ref.kind == "reasoning":
        for task in envsim.load_fixture_reasoning_tasks():
            if task.id == ref.name:
                return task
        raise envsim.SpecValidationError(f"no bundled reasoning task {ref.name!r}")
    raise ValueError(f"unknown env kind: {ref.kind!r}")


def _session_config(
    plan: ExperimentPlan,
    ref: EnvRef,
    env,
    regime: Regime,
    multiple: Fraction,
    seed: int,
    real_time: bool,
) -> SessionConfig:
    if ref.kind == "reasoning":
        budget = BudgetSpec.per_case(env.baseline_x, multiple)
    else:
        budget = BudgetSpec.step_based(plan.step_tau, multiple)
    params = plan.reward_params or RewardParams(task_kind=ref.kind)
    return SessionConfig(
        env_kind=ref.kind,
        game=env if ref.kind == "game" else None,
        task=env if ref.kind == "reasoning" else None,
        ml_task=env if ref.kind == "ml" else None,
        budget=budget,
        latency=regime.model,
        timer=replace(plan.timer, seed=mix_seed(seed, 1)),
        reward_params=params,
        max_steps=plan.max_steps,
        seed=seed,
        query_latency=Duration(plan.query_latency_us),
        real_time=real_time,
    )


def run_plan(
    plan: ExperimentPlan,
    out_dir: Optional[Path] = None,
    real_time: bool = False,
) -> list[CellResult]:
    """Execute every cell; optionally write one trace file per episode."""
    cells: list[CellResult] = []
    for ei, ref in enumerate(plan.envs):
        env = _load_env(ref)
        for pi, pspec in enumerate(plan.policies):
            for ri, regime in enumerate(plan.latency_regimes):
                for bi, multiple in enumerate(plan.budget_multiples):
                    coords = CellCoords(
                        env=ref.name,
                        policy=pspec.get("name", f"policy{pi}"),
                        regime=regime.name,
                        budget_multiple=str(multiple),
                    )
                    episodes = []
                    for k in range(plan.episodes_per_cell):
                        seed = mix_seed(plan.base_seed, ei, pi, ri, bi, k)
                        policy = policies.build_policy({**pspec, "seed": mix_seed(seed, 2)})
                        config = _session_config(
                            plan, ref, env, regime, multiple, seed, real_time
                        )
                        result = run_session(policy, config)
                        episodes.append(result)
                        if out_dir is not None:
                            cell_dir = Path(out_dir) / plan.name / coords.slug()
                            cell_dir.mkdir(parents=True, exist_ok=True)
                            (cell_dir / f"ep{k:03d}.jsonl").write_text(
                                serialize_trace(result)
                            )
                    cells.append(CellResult(coords=coords, episodes=tuple(episodes)))
    cells.sort(key=lambda c: c.coords.key())
    return cells


REPORT_COLUMNS = (
    "env",
    "policy",
    "regime",
    "budget_multiple",
    "episodes",
    "mean_score",
    "mean_reward",
    "mean_accuracy",
    "on_time_rate",
    "mean_steps",
    "mean_effective_s",
)


def _cell_row(cell: CellResult) -> dict:
    row = {
        "env": cell.coords.env,
        "policy": cell.coords.policy,
        "regime": cell.coords.regime,
        "budget_multiple": cell.coords.budget_multiple,
    }
    row.update({k: _round(v) for k, v in cell.aggregates().items()})
    return row


def _round(value):
    return round(value, 9) if isinstance(value, float) else value


def render_csv(cells: Sequence[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for cell in sorted(cells, key=lambda c: c.coords.key()):
        writer.writerow(_cell_row(cell))
    return buf.getvalue()


def render_json(cells: Sequence[CellResult]) -> str:
    rows = [_cell_row(cell) for cell in sorted(cells, key=lambda c: c.coords.key())]
    return json.dumps({"cells": rows}, sort_keys=True, indent=2) + "\n"


def render_steps_series(cells: Sequence[CellResult]) -> str:
    """Per-budget step-count series (plot-ready): steps used vs budget multiple."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["env", "policy", "regime", "budget_multiple", "mean_steps"])
    for cell in sorted(cells, key=lambda c: c.coords.key()):
        writer.writerow(
            [
                cell.coords.env,
                cell.coords.policy,
                cell.coords.regime,
                cell.coords.budget_multiple,
                _round(cell.mean_steps),
            ]
        )
    return buf.getvalue()


def emit_report(cells: Sequence[CellResult], out_dir: Path, fmt: str = "csv") -> list[Path]:
    """Write the cell report (csv or json) plus the step-count series."""
    if not cells:
        raise ValueError("cannot emit a report for zero cells")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        path = out_dir / "report.csv"
        path.write_text(render_csv(cells))
    elif fmt == "json":
        path = out_dir / "report.json"
        path.write_text(render_json(cells))
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    written.append(path)
    series = out_dir / "steps_by_budget.csv"
    series.write_text(render_steps_series(cells))
    written.append(series)
    return written
