"""Deterministic alternating Poisson regression with multiplicative updates.

One outer iteration sweeps the modes in order. For mode k the weights are
redistributed into that factor (B = A_k * diag(w)), the complement row
products Pi are formed once from the stored nonzeros, and up to
max_inner_iters multiplicative updates B <- B * Phi are applied, where
Phi[i, r] accumulates (x / max(m, eps)) * Pi over nonzeros with i_k = i.
Because the other factors are kept column-stochastic (one-norm normalized),
the mode-k gradient is 1 - Phi and the KKT residual is |min(B, 1 - Phi)|.

The solver is fully deterministic: fixed inputs give bitwise-identical traces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, RankMismatchError
from .objective import DEFAULT_EPS, _nll_arrays
from .tensor import (
    KruskalModel,
    SparseCountTensor,
    accumulate_rows,
    check_shapes,
    mttkrp_masked,
    model_entries,
    row_products,
)
from .trace import SolveTrace, TraceEntry

#: Factor entries below this are treated as stuck at zero for the
#: complementary-slackness shift.
ZERO_STUCK_TOL = 1e-10


@dataclass(frozen=True)
class CpaprOptions:
    """Knobs for cpapr_mu; max_outer_iters is the budgeted work unit."""

    max_outer_iters: int = 1000
    max_inner_iters: int = 10
    kkt_tol: float = 1e-4
    eps: float = DEFAULT_EPS
    inadmissible_offset: float = 1e-2  # kappa

    def __post_init__(self):
        if self.max_outer_iters < 0 or self.max_inner_iters <= 0:
            raise ValueError("iteration budgets must be positive (outer may be 0)")
        if self.kkt_tol <= 0 or self.eps <= 0 or self.inadmissible_offset <= 0:
            raise ValueError("tolerances and the zero offset must be positive")


def cpapr_mu(
    x: SparseCountTensor,
    rank: int,
    init: KruskalModel,
    opts: CpaprOptions = CpaprOptions(),
) -> SolveTrace:
    """Fit a rank-R Poisson CP model by multiplicative updates.

    Returns a trace whose exact-NLL sequence is non-increasing over outer
    iterations; converged is True iff the max KKT violation across modes
    dropped below opts.kkt_tol. A zero budget returns `init` unchanged.
    """
    check_shapes(x, init)
    if init.rank != rank:
        raise RankMismatchError(f"init has rank {init.rank}, requested {rank}")
    if opts.max_outer_iters == 0:
        return SolveTrace("cpapr-mu", init, [], False, 0)

    d = x.ndim
    weights, factors = init.mutable_copy()
    # absorb scale into weights so every factor starts column-stochastic
    for k in range(d):
        s = factors[k].sum(axis=0)
        weights *= s
        factors[k] /= np.where(s > 0, s, 1.0)

    phis: list[np.ndarray | None] = [None] * d
    kkt_modes = np.zeros(d)
    rows_per_mode = [x.coords[:, k] for k in range(d)]
    entries: list[TraceEntry] = []
    converged = False
    start = time.perf_counter()

    for outer in range(opts.max_outer_iters):
        iteration_converged = True
        for k in range(d):
            # entries stuck at zero under negative gradient pressure (multiplier
            # above 1 wants them to grow but 0 * phi stays 0) get a kappa bump
            if outer > 0 and phis[k] is not None:
                stuck = (phis[k] > 1.0) & (factors[k] < ZERO_STUCK_TOL)
                if stuck.any():
                    factors[k][stuck] += opts.inadmissible_offset
            b = factors[k] * weights
            pi = row_products(factors, x.coords, skip=k)
            rows = rows_per_mode[k]
            phi = np.zeros_like(b)
            for _ in range(opts.max_inner_iters):
                m = (b[rows] * pi).sum(axis=1)
                ratio = x.values / np.maximum(m, opts.eps)
                phi = accumulate_rows(rows, ratio[:, None] * pi, x.shape[k])
                kkt_modes[k] = float(np.abs(np.minimum(b, 1.0 - phi)).max()) if b.size else 0.0
                if kkt_modes[k] < opts.kkt_tol:
                    break
                iteration_converged = False
                b *= phi
            phis[k] = phi
            s = b.sum(axis=0)
            weights = s.copy()
            factors[k] = b / np.where(s > 0, s, 1.0)
        nll = _nll_arrays(x, weights, factors, opts.eps)
        if not np.isfinite(nll):
            raise NonFiniteError(f"NLL became non-finite at outer iteration {outer + 1}")
        entries.append(
            TraceEntry(
                work=outer + 1,
                nll=nll,
                kkt=float(kkt_modes.max()),
                wall=time.perf_counter() - start,
            )
        )
        if iteration_converged:
            converged = True
            break

    model = KruskalModel(weights, factors)
    return SolveTrace("cpapr-mu", model, entries, converged, len(entries))


def kkt_violation(x: SparseCountTensor, m: KruskalModel, mode: int, eps: float = DEFAULT_EPS) -> float:
    """Complementarity residual of the mode-k subproblem at the current model.

    The subproblem variable is B = A_mode * diag(w). Returns
    max |min(B, grad_B f)| with grad_B[i, r] = prod_{j != mode} colsum_j(r)
    minus the (x / max(m, eps))-weighted masked MTTKRP; exactly zero at a KKT
    point of the non-negativity-constrained mode subproblem.
    """
    check_shapes(x, m)
    b = m.factors[mode] * m.weights
    other = np.ones(m.rank)
    for j, f in enumerate(m.factors):
        if j != mode:
            other = other * f.sum(axis=0)
    if x.nnz:
        ratio = x.values / np.maximum(model_entries(m, x.coords), eps)
        grad = other[None, :] - mttkrp_masked(x, m, mode, ratio)
    else:
        grad = np.tile(other, (x.shape[mode], 1))
    if b.size == 0:
        return 0.0
    return float(np.abs(np.minimum(b, grad)).max())
