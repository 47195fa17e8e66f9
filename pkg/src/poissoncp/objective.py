"""Poisson negative log-likelihood, exact gradients, and the stochastic estimator.

The objective is f(X, M) = sum_idx m_idx - x_idx * log(m_idx), taken over every
entry of the tensor (the constant sum log(x!) is dropped). The all-entries sum
of m factors through column sums, so only stored nonzeros are ever touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySampleError
from .tensor import (
    KruskalModel,
    SparseCountTensor,
    accumulate_rows,
    check_shapes,
    model_entries,
    row_products,
)

#: Default guard applied as m <- max(m, eps) inside logs and divisions.
DEFAULT_EPS = 1e-10


@dataclass(frozen=True)
class NllValue:
    """Objective value in nats plus the count of analytically folded zeros."""

    value: float
    n_entries_implicit: int

    def __float__(self):
        return self.value


def _nll_arrays(x: SparseCountTensor, weights, factors, eps: float) -> float:
    """NLL from raw solver arrays, avoiding model construction per iteration."""
    total = weights.copy()
    for f in factors:
        total *= f.sum(axis=0)
    value = float(total.sum())
    if x.nnz:
        m = row_products(factors, x.coords) @ weights
        value -= float(np.dot(x.values, np.log(np.maximum(m, eps))))
    return value


def poisson_nll(x: SparseCountTensor, m: KruskalModel, eps: float = DEFAULT_EPS) -> NllValue:
    """Exact Poisson NLL of the model against the count tensor.

    The linear term runs over all entries via the factored total sum; the log
    term only over stored nonzeros (x = 0 kills it). Model values below eps
    are clamped inside the log so the result stays finite.
    """
    check_shapes(x, m)
    value = _nll_arrays(x, m.weights, list(m.factors), eps)
    return NllValue(value, x.num_zero_entries)


def poisson_nll_gradient(
    x: SparseCountTensor, m: KruskalModel, eps: float = DEFAULT_EPS
) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradient of poisson_nll w.r.t. every factor entry and weight.

    For mode k: grad[k][i, r] = w_r * prod_{j != k} colsum_j(r)
                               - w_r * sum_{nonzeros with i_k = i} (x/m) * prod_{j != k} A_j(i_j, r),
    with the same eps clamp on m as the objective. Also returns the weight
    gradient d f / d w_r.
    """
    check_shapes(x, m)
    colsums = [f.sum(axis=0) for f in m.factors]
    if x.nnz:
        pi_all = row_products(m.factors, x.coords)
        mvals = pi_all @ m.weights
        ratio = x.values / np.maximum(mvals, eps)
    factor_grads = []
    for k in range(m.ndim):
        other = np.ones(m.rank)
        for j, cs in enumerate(colsums):
            if j != k:
                other = other * cs
        grad = np.tile(m.weights * other, (m.shape[k], 1))
        if x.nnz:
            pi_k = row_products(m.factors, x.coords, skip=k)
            grad -= m.weights * accumulate_rows(x.coords[:, k], ratio[:, None] * pi_k, x.shape[k])
        factor_grads.append(grad)
    weight_grad = np.ones(m.rank)
    for cs in colsums:
        weight_grad = weight_grad * cs
    if x.nnz:
        weight_grad = weight_grad - (ratio[:, None] * pi_all).sum(axis=0)
    return factor_grads, weight_grad


def stochastic_nll_estimate(x: SparseCountTensor, m: KruskalModel, sample, eps: float = DEFAULT_EPS) -> float:
    """Unbiased NLL estimate from a stratified sample (see gcp.sample_stratified).

    Each sampled entry contributes weight * (m - count * log(max(m, eps))).
    With a sample enumerating every entry at unit weight this reproduces
    poisson_nll up to float reassociation.
    """
    check_shapes(x, m)
    if sample.coords.shape[0] == 0:
        raise EmptySampleError("cannot estimate the objective from an empty sample")
    mvals = model_entries(m, sample.coords)
    losses = mvals - sample.counts * np.log(np.maximum(mvals, eps))
    return float(np.dot(sample.weights, losses))
