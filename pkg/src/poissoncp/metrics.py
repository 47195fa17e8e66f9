"""Comparison machinery for sets of fitted models.

Covers the approximate-MLE selection (minimum NLL, first index wins ties),
the signed relative NLL difference, the epsilon-ball probability estimate,
the factor match score with exact assignment, the FMS threshold fraction,
and its area under the curve.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatchError, RankMismatchError
from .objective import poisson_nll
from .records import ResultSet
from .tensor import KruskalModel, SparseCountTensor

#: Conventional FMS levels: models scoring at least these are called
#: "similar" / "equal" to each other.
FMS_SIMILAR = 0.85
FMS_EQUAL = 0.95


def approx_mle(s: ResultSet, x: SparseCountTensor) -> tuple[int, KruskalModel]:
    """Minimum-NLL member of the set; exact ties go to the smallest index."""
    s.require_nonempty()
    best_idx = 0
    best_nll = None
    for i, rec in enumerate(s):
        nll = rec.nll if rec.nll is not None else poisson_nll(x, rec.model).value
        if best_nll is None or nll < best_nll:
            best_idx, best_nll = i, nll
    return best_idx, s[best_idx].model


def signed_rel_diff(f_n: float, f_star: float) -> float:
    """(f_n - f_star) / |f_star|; negative means f_n is the better minimizer."""
    if f_star == 0.0:
        raise ZeroDivisionError("signed relative NLL difference undefined for f* = 0")
    return (f_n - f_star) / abs(f_star)


def prob_within_eps(mstar: KruskalModel, s: ResultSet, x: SparseCountTensor, eps: float) -> float:
    """Fraction of members whose |signed relative NLL difference| is below eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    s.require_nonempty()
    f_star = poisson_nll(x, mstar).value
    hits = sum(1 for rec in s if abs(signed_rel_diff(rec.nll, f_star)) < eps)
    return hits / len(s)


def _column_norms(m: KruskalModel) -> list[np.ndarray]:
    return [np.sqrt((f * f).sum(axis=0)) for f in m.factors]


def fms_score_matrix(m1: KruskalModel, m2: KruskalModel) -> np.ndarray:
    """Pairwise component scores: weight-discrepancy penalty times cosine products.

    Entry (i, j) scores component i of m1 against component j of m2. Zero-norm
    columns contribute cosine 0; two zero rescaled weights score penalty 1.
    """
    if m1.rank != m2.rank:
        raise RankMismatchError(f"rank {m1.rank} vs {m2.rank}")
    if m1.shape != m2.shape:
        raise DimensionMismatchError(f"shape {m1.shape} vs {m2.shape}")
    norms1, norms2 = _column_norms(m1), _column_norms(m2)
    xi1 = m1.weights * np.prod(norms1, axis=0)
    xi2 = m2.weights * np.prod(norms2, axis=0)
    denom = np.maximum.outer(xi1, xi2)
    penalty = 1.0 - np.abs(np.subtract.outer(xi1, xi2)) / np.where(denom > 0, denom, 1.0)
    score = penalty
    for f1, f2, n1, n2 in zip(m1.factors, m2.factors, norms1, norms2):
        cos = (f1.T @ f2) / np.outer(np.where(n1 > 0, n1, 1.0), np.where(n2 > 0, n2, 1.0))
        cos[n1 == 0, :] = 0.0
        cos[:, n2 == 0] = 0.0
        score = score * cos
    return score


def fms(m1: KruskalModel, m2: KruskalModel) -> float:
    """Factor match score in [0, 1]: best mean component score over matchings.

    The component matching is solved exactly as a maximum-weight assignment;
    1.0 means the models agree up to component permutation and rescaling.
    """
    score = fms_score_matrix(m1, m2)
    rows, cols = linear_sum_assignment(score, maximize=True)
    return float(score[rows, cols].mean())


def fms_indicator(mstar: KruskalModel, mn: KruskalModel, t: float) -> int:
    """1 iff fms(mstar, mn) >= t."""
    return int(fms(mstar, mn) >= t)


def fms_fraction(mstar: KruskalModel, s: ResultSet, t: float) -> float:
    """Fraction of the set scoring at least t against mstar; non-increasing in t."""
    s.require_nonempty()
    return sum(fms_indicator(mstar, rec.model, t) for rec in s) / len(s)


def fms_values(mstar: KruskalModel, s: ResultSet) -> np.ndarray:
    """FMS of every member against mstar, in set order."""
    s.require_nonempty()
    return np.array([fms(mstar, rec.model) for rec in s])


def fms_fraction_curve(scores: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    """Threshold fractions over a grid, from precomputed FMS values."""
    return (scores[None, :] >= t_grid[:, None]).mean(axis=1)


def fms_auc(mstar: KruskalModel, s: ResultSet, tau: float, scores: np.ndarray | None = None) -> tuple[float, float]:
    """Integral of the threshold fraction over t in [tau, 1], raw and normalized.

    The fraction is a step function of t, so the integral reduces exactly to
    mean(clip(fms_n - tau, 0, 1 - tau)); the normalized value divides by the
    fit-level area (1 - tau).
    """
    if not 0 <= tau < 1:
        raise ValueError("tau must be in [0, 1)")
    if scores is None:
        scores = fms_values(mstar, s)
    raw = float(np.clip(scores - tau, 0.0, 1.0 - tau).mean())
    return raw, raw / (1.0 - tau)
