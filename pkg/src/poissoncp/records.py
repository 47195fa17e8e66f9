"""Multi-start bookkeeping: one record per solve, ordered sets of records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import EmptySetError
from .tensor import KruskalModel


@dataclass
class SolveRecord:
    """Outcome of one multi-start solve; nll is the exact recomputed value."""

    run_id: str
    seed: int
    method: str
    options_digest: str
    nll: float
    work_units: int
    converged: bool
    model: KruskalModel | None = None
    j: int | None = None
    k: int | None = None
    wall: float = 0.0
    model_path: str | None = None


@dataclass
class ResultSet:
    """Insertion-ordered records; the order defines metric tie-breaking."""

    label: str
    records: list[SolveRecord] = field(default_factory=list)

    def append(self, record: SolveRecord) -> None:
        self.records.append(record)

    def extend(self, records) -> None:
        self.records.extend(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SolveRecord]:
        return iter(self.records)

    def __getitem__(self, i) -> SolveRecord:
        return self.records[i]

    def require_nonempty(self) -> None:
        if not self.records:
            raise EmptySetError(f"result set {self.label!r} is empty")

    def nlls(self) -> np.ndarray:
        return np.array([r.nll for r in self.records])

    def models(self) -> list[KruskalModel]:
        return [r.model for r in self.records]

    def union(self, *others: "ResultSet", label: str = "union") -> "ResultSet":
        """Concatenate in the given order; self first (defines tie-breaking)."""
        out = ResultSet(label, list(self.records))
        for o in others:
            out.records.extend(o.records)
        return out
