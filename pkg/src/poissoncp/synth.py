"""Synthetic low-rank Poisson problems and random initial guesses.

Problems are built by drawing a random non-negative Kruskal "truth" whose
total sum matches the target count, then sampling the count tensor from the
Poisson field it defines. Sampling is sparse: draw the grand total
N ~ Poisson(total), then N index draws from the model viewed as a
probability mass (component by weight, then one index per mode from that
component's column), accumulating counts. Cost is O(N), never O(prod(shape)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DensityUnachievableError
from .gcp import as_generator
from .tensor import KruskalModel, SparseCountTensor, make_sparse, model_total_sum

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class ProblemSpec:
    """Shape, rank, and target sparsity (density or an absolute count target)."""

    shape: tuple[int, ...]
    rank: int
    density: float | None = None
    target_nnz: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if any(s <= 0 for s in self.shape) or self.rank <= 0:
            raise ValueError("dimensions and rank must be positive")
        if (self.density is None) == (self.target_nnz is None):
            raise ValueError("give exactly one of density or target_nnz")
        if self.density is not None and not 0 < self.density <= 1:
            raise ValueError("density must be in (0, 1]")
        if self.target_nnz is not None and self.target_nnz < 0:
            raise ValueError("target_nnz must be non-negative")

    @property
    def target_total(self) -> float:
        if self.target_nnz is not None:
            return float(self.target_nnz)
        return self.density * math.prod(self.shape)


def create_guess(shape, rank: int, rng, total: float | None = None) -> KruskalModel:
    """Random strictly positive model with one-norm-normalized columns.

    Factor entries are uniform(0, 1); each column is rescaled to unit sum, so
    the model total equals the weight sum. Weights are 1, or total/rank when a
    nominal scale is given (typically the data's total count, which keeps the
    initial NLL finite and comparable across guesses).
    """
    rng = as_generator(rng)
    factors = []
    for size in shape:
        f = np.maximum(rng.random((int(size), rank)), _TINY)
        factors.append(f / f.sum(axis=0))
    weights = np.ones(rank) if total is None else np.full(rank, total / rank)
    return KruskalModel(weights, factors)


def sample_counts(model: KruskalModel, rng) -> SparseCountTensor:
    """Draw a sparse count tensor from the Poisson field defined by the model.

    Expects one-norm-normalized factor columns (as built here), so the weight
    vector is the per-component mass. A zero-total model yields an empty tensor.
    """
    rng = as_generator(rng)
    total = model_total_sum(model)
    shape = model.shape
    if total <= 0:
        return make_sparse(shape, [], [])
    n = int(rng.poisson(total))
    if n == 0:
        return make_sparse(shape, [], [])
    prob = model.weights / model.weights.sum()
    comp = rng.choice(model.rank, size=n, p=prob)
    coords = np.empty((n, model.ndim), dtype=np.int64)
    for k, factor in enumerate(model.factors):
        for r in range(model.rank):
            mask = comp == r
            cnt = int(mask.sum())
            if cnt == 0:
                continue
            cdf = np.cumsum(factor[:, r])
            cdf /= cdf[-1]
            idx = np.searchsorted(cdf, rng.random(cnt), side="right")
            coords[mask, k] = np.minimum(idx, shape[k] - 1)
    uniq, counts = np.unique(coords, axis=0, return_counts=True)
    return make_sparse(shape, uniq, counts)


def create_problem(spec: ProblemSpec, rng) -> tuple[KruskalModel, SparseCountTensor]:
    """Random truth model scaled to the target total count, plus sampled data.

    The expected total count equals density * prod(shape) (or target_nnz), so
    for sparse targets the achieved nonzero count lands near the target up to
    Poisson noise and index collisions. The truth is returned for reference
    only; recovering it is not the fitting objective.
    """
    rng = as_generator(rng)
    total = spec.target_total
    if total < 1.0:
        raise DensityUnachievableError(
            f"target density implies an expected total count of {total:.3g} < 1"
        )
    base = create_guess(spec.shape, spec.rank, rng)
    weights = np.maximum(rng.random(spec.rank), _TINY)
    weights = weights * (total / weights.sum())
    truth = KruskalModel(weights, base.factors)
    data = sample_counts(truth, rng)
    return truth, data
