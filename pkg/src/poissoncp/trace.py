"""Solve traces shared by the deterministic, stochastic, and hybrid solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

from .tensor import KruskalModel


@dataclass
class TraceEntry:
    """One work unit: an outer iteration (deterministic) or an epoch (stochastic)."""

    work: int
    nll: float
    kkt: float | None = None
    lr: float | None = None
    accepted: bool | None = None
    wall: float = 0.0
    cycle: int | None = None
    stage: str | None = None


@dataclass
class StageRecord:
    """Final state of one hybrid stage, kept so cycle handoffs are inspectable."""

    cycle: int
    stage: str  # "stochastic" | "deterministic"
    method: str
    work_units: int
    converged: bool
    model: KruskalModel


@dataclass
class SolveTrace:
    method: str
    model: KruskalModel
    entries: list[TraceEntry]
    converged: bool
    work_units: int
    checkpoints: dict[float, KruskalModel] = field(default_factory=dict)
    stages: list[StageRecord] = field(default_factory=list)

    def nll_history(self) -> list[float]:
        return [e.nll for e in self.entries]
