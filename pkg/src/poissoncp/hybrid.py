"""Cyclic two-stage driver: stochastic search then deterministic refinement.

Each cycle runs the stochastic method from the previous iterate for its epoch
budget, then hands the result to the deterministic method for its iteration
budget; the stochastic stage always comes first. Per-stage RNG seeds are
derived from the run seed and the (cycle, stage) coordinates so that budget
sweeps are comparable start-for-start and any stage can be reproduced as a
standalone run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .cpapr import CpaprOptions, cpapr_mu
from .errors import BudgetOutOfRangeError, OptionsTypeMismatchError, UnknownMethodError
from .gcp import GcpOptions, gcp_adam
from .tensor import KruskalModel, SparseCountTensor
from .trace import SolveTrace, StageRecord, TraceEntry

STOCHASTIC, DETERMINISTIC = "stochastic", "deterministic"

_METHODS = {
    "cpapr-mu": (cpapr_mu, CpaprOptions, False),
    "cpapr": (cpapr_mu, CpaprOptions, False),
    "gcp-adam": (gcp_adam, GcpOptions, True),
    "gcp": (gcp_adam, GcpOptions, True),
}


def cp_poisson(
    x: SparseCountTensor,
    rank: int,
    init: KruskalModel,
    method: str,
    opts,
    rng=None,
) -> SolveTrace:
    """Dispatch to a registered Poisson CP solver and return its trace unchanged."""
    try:
        solver, opts_type, wants_rng = _METHODS[str(method).lower()]
    except KeyError:
        raise UnknownMethodError(f"unknown solver {method!r}; known: cpapr-mu, gcp-adam") from None
    if not isinstance(opts, opts_type):
        raise OptionsTypeMismatchError(f"{method} expects {opts_type.__name__}, got {type(opts).__name__}")
    if wants_rng:
        return solver(x, rank, init, opts, rng=rng)
    return solver(x, rank, init, opts)


@dataclass(frozen=True)
class CycleSpec:
    """Solver choices and budgets for one cycle (budgets live inside the opts)."""

    s_opts: GcpOptions
    d_opts: CpaprOptions
    s_method: str = "gcp-adam"
    d_method: str = "cpapr-mu"

    @property
    def stochastic_budget(self) -> int:
        return self.s_opts.max_epochs

    @property
    def deterministic_budget(self) -> int:
        return self.d_opts.max_outer_iters


#: Adaptive-policy hook: (cycle_index, planned CycleSpec, stage records so far)
#: -> CycleSpec to actually run. The default (None) is a static policy.
PolicyHook = Callable[[int, CycleSpec, Sequence[StageRecord]], CycleSpec]


@dataclass(frozen=True)
class Strategy:
    cycles: tuple[CycleSpec, ...]
    policy: PolicyHook | None = None

    def __post_init__(self):
        if len(self.cycles) < 1:
            raise ValueError("a strategy needs at least one cycle")

    @property
    def num_cycles(self) -> int:
        return len(self.cycles)


def constant_work_strategy(
    total_work: int,
    j: int,
    s_opts: GcpOptions | None = None,
    d_opts: CpaprOptions | None = None,
) -> Strategy:
    """Single-cycle strategy with j stochastic epochs and total_work - j iterations."""
    if not 0 <= j <= total_work:
        raise BudgetOutOfRangeError(f"need 0 <= j <= W, got j={j}, W={total_work}")
    s = replace(s_opts if s_opts is not None else GcpOptions(), max_epochs=j)
    d = replace(d_opts if d_opts is not None else CpaprOptions(), max_outer_iters=total_work - j)
    return Strategy((CycleSpec(s_opts=s, d_opts=d),))


def _seed_entropy(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def stage_seed(seed, cycle: int, stage) -> np.random.SeedSequence:
    """Deterministic per-stage seed from the run seed and (cycle, stage).

    `seed` is an int or tuple of non-negative ints; `stage` is "stochastic",
    "deterministic", or the stage index 0/1. The returned SeedSequence can be
    fed to numpy.random.default_rng to replay a stage standalone.
    """
    if isinstance(stage, str):
        stage = {STOCHASTIC: 0, DETERMINISTIC: 1}[stage]
    return np.random.SeedSequence(_seed_entropy(seed) + (int(cycle), int(stage)))


def cgc(
    x: SparseCountTensor,
    rank: int,
    num_cycles: int,
    strat: Strategy,
    init: KruskalModel,
    seed=0,
) -> SolveTrace:
    """Run the cyclic stochastic/deterministic hybrid for num_cycles cycles.

    Each cycle feeds the previous iterate to the stochastic stage and its
    output to the deterministic stage. Early KKT convergence ends only the
    current deterministic stage; remaining cycles still run. The returned
    trace concatenates both stages' entries with cycle/stage annotations and
    records each stage's final model in trace.stages.
    """
    if num_cycles != strat.num_cycles:
        raise BudgetOutOfRangeError(f"strategy has {strat.num_cycles} cycles, asked for {num_cycles}")
    model = init
    entries: list[TraceEntry] = []
    stages: list[StageRecord] = []
    work = 0
    for cycle, planned in enumerate(strat.cycles):
        spec = planned if strat.policy is None else strat.policy(cycle, planned, tuple(stages))
        for stage, method, opts in (
            (STOCHASTIC, spec.s_method, spec.s_opts),
            (DETERMINISTIC, spec.d_method, spec.d_opts),
        ):
            rng = np.random.default_rng(stage_seed(seed, cycle, stage))
            sub = cp_poisson(x, rank, model, method, opts, rng=rng)
            for e in sub.entries:
                entries.append(
                    TraceEntry(
                        work=work + e.work,
                        nll=e.nll,
                        kkt=e.kkt,
                        lr=e.lr,
                        accepted=e.accepted,
                        wall=e.wall,
                        cycle=cycle,
                        stage=stage,
                    )
                )
            work += sub.work_units
            model = sub.model
            stages.append(StageRecord(cycle, stage, method, sub.work_units, sub.converged, model))
    ran = [s for s in stages if s.work_units > 0]
    converged = ran[-1].converged if ran else False
    return SolveTrace("cgc", model, entries, converged, work, stages=stages)
