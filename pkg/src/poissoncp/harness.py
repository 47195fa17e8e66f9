"""Multi-start experiment harness: derived seeds, worker pool, persistence.

Each start n gets its guess from seed entropy (seed, 0, n) and its solver
randomness from (seed, 1, n); sweep pairs share both across (j, k) so budget
columns are comparable start-for-start. Every solve is persisted as one model
file plus a row in records.csv (rewritten in canonical order on completion;
wall times go to timings.csv, which is excluded from the determinism
contract).
"""

from __future__ import annotations

import csv
import hashlib
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cpapr import CpaprOptions
from .errors import BudgetOutOfRangeError, UnknownMethodError
from .gcp import GcpOptions
from .hybrid import Strategy, cgc, constant_work_strategy
from .objective import poisson_nll
from .records import ResultSet, SolveRecord
from .synth import create_guess
from .tensor import SparseCountTensor
from .tensorio import load_model, save_model

RECORDS_FILE = "records.csv"
TIMINGS_FILE = "timings.csv"
MODELS_DIR = "models"

_RECORD_COLUMNS = [
    "run_id",
    "method",
    "j",
    "k",
    "start",
    "seed",
    "rank",
    "nll",
    "work_units",
    "converged",
    "model_file",
    "options_digest",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one multi-start experiment."""

    rank: int
    method: str  # cpapr | gcp | cgc | sweep
    num_starts: int = 1
    seed: int = 0
    work_budget: int = 100  # W; per-start budget for every method
    j: int = 0  # stochastic share for method=cgc
    j_values: tuple[int, ...] = ()  # sweep grid
    cycles: int = 1
    cpapr_opts: CpaprOptions = field(default_factory=CpaprOptions)
    gcp_opts: GcpOptions = field(default_factory=GcpOptions)
    workers: int = 1

    def __post_init__(self):
        if self.num_starts < 1:
            raise ValueError("num_starts must be >= 1")
        if self.method not in ("cpapr", "gcp", "cgc", "sweep"):
            raise UnknownMethodError(f"unknown experiment method {self.method!r}")
        if self.method == "sweep":
            if self.work_budget < 1:
                raise BudgetOutOfRangeError("sweep requires work_budget >= 1")
            if not self.j_values:
                raise BudgetOutOfRangeError("sweep requires a j grid")
            bad = [j for j in self.j_values if not 0 <= j <= self.work_budget]
            if bad:
                raise BudgetOutOfRangeError(f"j values {bad} outside [0, {self.work_budget}]")


def options_digest(*opts) -> str:
    return hashlib.sha1("|".join(repr(o) for o in opts).encode()).hexdigest()[:12]


def _job_strategies(config: ExperimentConfig) -> list[tuple[int, int, Strategy]]:
    """(j, k, strategy) jobs; plain solvers are degenerate single-cycle runs."""
    w = config.work_budget
    if config.method == "cpapr":
        pairs = [0]
    elif config.method == "gcp":
        pairs = [w]
    elif config.method == "cgc":
        pairs = [config.j]
    else:
        pairs = list(config.j_values)
    jobs = []
    for j in pairs:
        strat = constant_work_strategy(w, j, config.gcp_opts, config.cpapr_opts)
        if config.cycles > 1:
            strat = Strategy(strat.cycles * config.cycles)
        jobs.append((j, w - j, strat))
    return jobs


def run_multistart(config: ExperimentConfig, x: SparseCountTensor, out_dir=None) -> ResultSet:
    """Run N starts (per (j,k) pair in sweep mode) and return the ResultSet.

    Records are ordered by (j, start). When out_dir is given, every model is
    saved as it completes and the canonical index is rewritten at the end, so
    an interrupted run keeps its finished solves.
    """
    jobs = _job_strategies(config)
    digest = options_digest(config.gcp_opts, config.cpapr_opts, config.work_budget, config.cycles)
    total = x.total_count

    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, MODELS_DIR), exist_ok=True)
    lock = threading.Lock()
    results: dict[tuple[int, int], SolveRecord] = {}
    timings: dict[tuple[int, int], float] = {}

    def solve_one(job_idx: int, start: int) -> None:
        j, k, strat = jobs[job_idx]
        guess_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0, start)))
        guess = create_guess(x.shape, config.rank, guess_rng, total=total)
        t0 = time.perf_counter()
        trace = cgc(x, config.rank, strat.num_cycles, strat, guess, seed=(config.seed, 1, start))
        wall = time.perf_counter() - t0
        run_id = f"{config.method}_j{j:03d}_k{k:03d}_s{start:04d}"
        record = SolveRecord(
            run_id=run_id,
            seed=config.seed,
            method=config.method,
            options_digest=digest,
            nll=poisson_nll(x, trace.model).value,
            work_units=trace.work_units,
            converged=trace.converged,
            model=trace.model,
            j=j,
            k=k,
            wall=wall,
        )
        if out_dir is not None:
            rel = os.path.join(MODELS_DIR, run_id + ".kt")
            save_model(trace.model, os.path.join(out_dir, rel))
            record.model_path = rel
        with lock:
            results[(job_idx, start)] = record
            timings[(job_idx, start)] = wall

    tasks = [(ji, s) for ji in range(len(jobs)) for s in range(config.num_starts)]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(lambda t: solve_one(*t), tasks))
    else:
        for t in tasks:
            solve_one(*t)

    rset = ResultSet(config.method)
    for ji, s in tasks:
        rset.append(results[(ji, s)])
    if out_dir is not None:
        write_records(rset, config, out_dir)
    return rset


def _record_row(rec: SolveRecord, config: ExperimentConfig) -> list:
    start = int(rec.run_id.rsplit("_s", 1)[1])
    return [
        rec.run_id,
        rec.method,
        rec.j,
        rec.k,
        start,
        rec.seed,
        config.rank,
        repr(rec.nll),
        rec.work_units,
        int(rec.converged),
        rec.model_path or "",
        rec.options_digest,
    ]


def write_records(rset: ResultSet, config: ExperimentConfig, out_dir) -> None:
    with open(os.path.join(out_dir, RECORDS_FILE), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_RECORD_COLUMNS)
        for rec in rset:
            w.writerow(_record_row(rec, config))
    with open(os.path.join(out_dir, TIMINGS_FILE), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "wall_seconds"])
        for rec in rset:
            w.writerow([rec.run_id, f"{rec.wall:.6f}"])


def load_result_set(out_dir, label: str | None = None, with_models: bool = True) -> ResultSet:
    """Rebuild a ResultSet from a persisted run directory, in index order."""
    rset = ResultSet(label or os.path.basename(os.path.normpath(out_dir)))
    with open(os.path.join(out_dir, RECORDS_FILE), newline="") as fh:
        for row in csv.DictReader(fh):
            model = None
            if with_models and row["model_file"]:
                model = load_model(os.path.join(out_dir, row["model_file"]))
            rset.append(
                SolveRecord(
                    run_id=row["run_id"],
                    seed=int(row["seed"]),
                    method=row["method"],
                    options_digest=row["options_digest"],
                    nll=float(row["nll"]),
                    work_units=int(row["work_units"]),
                    converged=bool(int(row["converged"])),
                    model=model,
                    j=int(row["j"]),
                    k=int(row["k"]),
                    model_path=row["model_file"] or None,
                )
            )
    return rset
