"""Stochastic all-at-once Poisson CP fitting with Adam.

Gradients are estimated from stratified samples: nonzeros drawn uniformly
with replacement (inverse-probability weight nnz/s_nz) and zero positions
drawn by uniform index rejection against the stored nonzeros (weight
nz/s_z). Every Adam step is followed by projection onto the non-negative
orthant. Epochs run a fixed number of steps; after each epoch the objective
is re-estimated on a fit sample drawn once per solve, and a worsened
estimate reverts the epoch and decays the learning rate. The run stops when
the rate falls below alpha_final or the epoch budget is exhausted, and the
model is snapshotted whenever the rate crosses a checkpoint value.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTensorError,
    EmptySampleError,
    NonFiniteError,
    RankMismatchError,
)
from .objective import DEFAULT_EPS
from .tensor import KruskalModel, SparseCountTensor, accumulate_rows, check_shapes
from .trace import SolveTrace, TraceEntry


@dataclass(frozen=True)
class GcpOptions:
    """Schedule, sampling, and Adam parameters; max_epochs is the work budget.

    Sample sizes left as None default to min(nnz, 1000) gradient samples per
    stratum and min(nnz, 10000) fit samples per stratum.
    """

    alpha0: float = 1e-3
    alpha_final: float = 1e-15
    decay: float = 0.1
    iters_per_epoch: int = 100
    max_epochs: int = 1000
    samples_nonzero: int | None = None
    samples_zero: int | None = None
    fit_samples_nonzero: int | None = None
    fit_samples_zero: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_eps: float = DEFAULT_EPS
    checkpoint_rates: tuple[float, ...] = (1e-3, 1e-9, 1e-15)

    def __post_init__(self):
        if not 0 < self.alpha_final <= self.alpha0:
            raise ValueError("need 0 < alpha_final <= alpha0")
        if not 0 < self.decay < 1:
            raise ValueError("decay must be in (0, 1)")
        if self.iters_per_epoch <= 0 or self.max_epochs < 0:
            raise ValueError("iters_per_epoch must be positive and max_epochs >= 0")


@dataclass(frozen=True)
class SampleSet:
    """Stratified sample: multi-indices, observed counts, and IP weights."""

    coords: np.ndarray  # (s, d) int64
    counts: np.ndarray  # (s,) float64; zero-stratum entries are 0
    weights: np.ndarray  # (s,) float64, positive
    n_nonzero: int
    n_zero: int


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, SeedSequence, int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _draw_zero_coords(x: SparseCountTensor, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform zero positions (with replacement) by rejection against nonzeros."""
    lin_nz = x.linearized()
    total = x.num_entries
    p_zero = x.num_zero_entries / total
    out = np.empty(count, dtype=np.int64)
    got = 0
    while got < count:
        need = count - got
        batch = int(need / max(p_zero, 1e-3)) + 16
        cand = rng.integers(0, total, size=batch)
        if lin_nz.size:
            pos = np.searchsorted(lin_nz, cand)
            pos = np.minimum(pos, lin_nz.size - 1)
            keep = cand[lin_nz[pos] != cand]
        else:
            keep = cand
        take = min(need, keep.size)
        out[got : got + take] = keep[:take]
        got += take
    return np.column_stack(np.unravel_index(out, x.shape)).astype(np.int64)


def sample_stratified(x: SparseCountTensor, s_nz: int, s_z: int, rng) -> SampleSet:
    """Draw s_nz nonzeros and s_z zero positions, both uniform with replacement."""
    if s_nz < 0 or s_z < 0:
        raise ValueError("stratum sizes must be non-negative")
    if s_nz == 0 and s_z == 0:
        raise EmptySampleError("at least one stratum must be sampled")
    if s_nz > 0 and x.nnz == 0:
        raise DegenerateTensorError("tensor has no nonzero entries to sample")
    if s_z > 0 and x.num_zero_entries == 0:
        raise DegenerateTensorError("tensor has no zero entries to sample")
    rng = as_generator(rng)
    parts_coords, parts_counts, parts_weights = [], [], []
    if s_nz:
        ids = rng.integers(0, x.nnz, size=s_nz)
        parts_coords.append(x.coords[ids])
        parts_counts.append(x.values[ids].astype(np.float64))
        parts_weights.append(np.full(s_nz, x.nnz / s_nz))
    if s_z:
        parts_coords.append(_draw_zero_coords(x, s_z, rng))
        parts_counts.append(np.zeros(s_z))
        parts_weights.append(np.full(s_z, x.num_zero_entries / s_z))
    return SampleSet(
        coords=np.concatenate(parts_coords, axis=0),
        counts=np.concatenate(parts_counts),
        weights=np.concatenate(parts_weights),
        n_nonzero=s_nz,
        n_zero=s_z,
    )


def full_enumeration_sample(x: SparseCountTensor) -> SampleSet:
    """Every entry once at unit weight; exact-gradient testing on tiny tensors."""
    total = x.num_entries
    coords = np.column_stack(np.unravel_index(np.arange(total), x.shape)).astype(np.int64)
    counts = np.zeros(total)
    if x.nnz:
        lin = np.ravel_multi_index(x.coords.T, x.shape)
        counts[lin] = x.values
    return SampleSet(coords, counts, np.ones(total), x.nnz, total - x.nnz)


def _pi_products(gathered: list[np.ndarray]) -> list[np.ndarray]:
    """Leave-one-out products of row-gathered factors via prefix/suffix scans."""
    d = len(gathered)
    shape = gathered[0].shape
    prefix = [np.ones(shape)]
    for k in range(d - 1):
        prefix.append(prefix[-1] * gathered[k])
    suffix = np.ones(shape)
    out = [None] * d
    for k in range(d - 1, -1, -1):
        out[k] = prefix[k] * suffix
        suffix = suffix * gathered[k]
    return out


def _estimate_nll(factors, sample: SampleSet, eps: float) -> float:
    """Stratified objective estimate for a weights-absorbed factor list."""
    prod = factors[0][sample.coords[:, 0]].copy()
    for k in range(1, len(factors)):
        prod *= factors[k][sample.coords[:, k]]
    m = prod.sum(axis=1)
    losses = m - sample.counts * np.log(np.maximum(m, eps))
    return float(np.dot(sample.weights, losses))


def _crossed(rate: float, above: float, below: float) -> bool:
    # relative tolerance so decade ladders built by repeated multiplication
    # still register (1e-3 * 0.1**6 != 1e-9 exactly)
    cut = rate * (1.0 - 1e-9)
    return above >= cut > below


def gcp_adam(
    x: SparseCountTensor,
    rank: int,
    init: KruskalModel,
    opts: GcpOptions = GcpOptions(),
    rng=None,
    sampler=sample_stratified,
) -> SolveTrace:
    """Fit a rank-R Poisson CP model with stratified stochastic Adam.

    `rng` may be a Generator, SeedSequence, or int; identical seeds give
    bitwise-identical traces. `sampler` is an injection point for tests
    (same signature as sample_stratified). A zero epoch budget returns
    `init` unchanged. Checkpoint models are collected on SolveTrace.checkpoints
    keyed by the configured rates.
    """
    check_shapes(x, init)
    if init.rank != rank:
        raise RankMismatchError(f"init has rank {init.rank}, requested {rank}")
    if opts.max_epochs == 0:
        return SolveTrace("gcp-adam", init, [], False, 0)
    rng = as_generator(rng)

    d = x.ndim
    weights, factors = init.mutable_copy()
    factors[0] *= weights  # absorb weights; optimization runs on factors only

    s_nz = opts.samples_nonzero if opts.samples_nonzero is not None else min(x.nnz, 1000)
    s_z = opts.samples_zero if opts.samples_zero is not None else s_nz
    fit_nz = opts.fit_samples_nonzero if opts.fit_samples_nonzero is not None else min(x.nnz, 10000)
    fit_z = opts.fit_samples_zero if opts.fit_samples_zero is not None else fit_nz

    fit_sample = sampler(x, fit_nz, fit_z, rng)
    f_best = _estimate_nll(factors, fit_sample, opts.loss_eps)
    if not np.isfinite(f_best):
        raise NonFiniteError("objective estimate at the initial model is not finite")

    mom1 = [np.zeros_like(f) for f in factors]
    mom2 = [np.zeros_like(f) for f in factors]
    step = 0
    saved = ([f.copy() for f in factors], [a.copy() for a in mom1], [a.copy() for a in mom2], step)
    alpha = opts.alpha0
    checkpoints: dict[float, KruskalModel] = {}
    entries: list[TraceEntry] = []
    start = time.perf_counter()

    def snapshot() -> KruskalModel:
        return KruskalModel(np.ones(rank), [f.copy() for f in factors])

    epoch = 0
    while epoch < opts.max_epochs and alpha >= opts.alpha_final:
        for _ in range(opts.iters_per_epoch):
            sample = sampler(x, s_nz, s_z, rng)
            gathered = [factors[k][sample.coords[:, k]] for k in range(d)]
            pis = _pi_products(gathered)
            m = (pis[0] * gathered[0]).sum(axis=1)
            v = sample.weights * (1.0 - sample.counts / np.maximum(m, opts.loss_eps))
            step += 1
            bc1 = 1.0 - opts.beta1**step
            bc2 = 1.0 - opts.beta2**step
            for k in range(d):
                g = accumulate_rows(sample.coords[:, k], v[:, None] * pis[k], x.shape[k])
                mom1[k] = opts.beta1 * mom1[k] + (1.0 - opts.beta1) * g
                mom2[k] = opts.beta2 * mom2[k] + (1.0 - opts.beta2) * g * g
                factors[k] -= alpha * (mom1[k] / bc1) / (np.sqrt(mom2[k] / bc2) + opts.adam_eps)
                np.maximum(factors[k], 0.0, out=factors[k])
        epoch += 1
        f_new = _estimate_nll(factors, fit_sample, opts.loss_eps)
        if not np.isfinite(f_new):
            raise NonFiniteError(f"objective estimate became non-finite at epoch {epoch}")
        wall = time.perf_counter() - start
        if f_new > f_best:
            factors = [f.copy() for f in saved[0]]
            mom1 = [a.copy() for a in saved[1]]
            mom2 = [a.copy() for a in saved[2]]
            step = saved[3]
            previous = alpha
            alpha = alpha * opts.decay
            for rate in opts.checkpoint_rates:
                if _crossed(rate, previous, alpha):
                    checkpoints[rate] = snapshot()
            entries.append(TraceEntry(work=epoch, nll=f_best, lr=previous, accepted=False, wall=wall))
        else:
            f_best = f_new
            saved = ([f.copy() for f in factors], [a.copy() for a in mom1], [a.copy() for a in mom2], step)
            entries.append(TraceEntry(work=epoch, nll=f_new, lr=alpha, accepted=True, wall=wall))

    converged = alpha < opts.alpha_final
    # rates the run was still sitting at when it stopped ("after the last
    # iteration using" that rate)
    for rate in opts.checkpoint_rates:
        if rate not in checkpoints and alpha <= rate * (1.0 + 1e-9) and rate <= opts.alpha0 * (1.0 + 1e-9):
            checkpoints[rate] = snapshot()
    model = KruskalModel(np.ones(rank), factors)
    return SolveTrace("gcp-adam", model, entries, converged, len(entries), checkpoints=checkpoints)
