"""Sparse count tensors, Kruskal (CP) models, and shared contraction kernels.

A :class:`SparseCountTensor` stores a d-way tensor of positive integer counts
in coordinate (COO) form, 0-based internally and sorted lexicographically.
Zeros are implicit. A :class:`KruskalModel` is the weighted sum of rank-one
outer products: entry(i) = sum_r weights[r] * prod_k factors[k][i_k, r].

Both types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateCoordinateError,
    IndexOutOfBoundsError,
    LengthMismatchError,
    NonPositiveValueError,
    RankMismatchError,
    ShapeMismatchError,
)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class SparseCountTensor:
    """d-way sparse tensor of strictly positive integer counts.

    Use :func:`make_sparse` to build one from unsorted user input; the
    constructor expects already-canonical arrays.
    """

    __slots__ = ("shape", "coords", "values", "_linear")

    def __init__(self, shape: tuple[int, ...], coords: np.ndarray, values: np.ndarray):
        self.shape = tuple(int(s) for s in shape)
        self.coords = _freeze(np.ascontiguousarray(coords, dtype=np.int64).reshape(len(values), len(self.shape)))
        self.values = _freeze(np.ascontiguousarray(values, dtype=np.int64))
        self._linear = None

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_entries(self) -> int:
        return math.prod(self.shape)

    @property
    def num_zero_entries(self) -> int:
        return self.num_entries - self.nnz

    @property
    def total_count(self) -> int:
        return int(self.values.sum())

    def linearized(self) -> np.ndarray:
        """Sorted linear (C-order) indices of the stored nonzeros."""
        if self._linear is None:
            if self.nnz:
                lin = np.ravel_multi_index(self.coords.T, self.shape)
            else:
                lin = np.empty(0, dtype=np.int64)
            self._linear = _freeze(np.sort(lin.astype(np.int64)))
        return self._linear

    def __repr__(self):
        return f"SparseCountTensor(shape={self.shape}, nnz={self.nnz})"


class KruskalModel:
    """Weights plus d factor matrices; all entries non-negative.

    factors[k] has shape (I_k, R); weights has length R.
    """

    __slots__ = ("weights", "factors")

    def __init__(self, weights, factors):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeMismatchError("weights must be a vector")
        fs = [np.ascontiguousarray(f, dtype=np.float64) for f in factors]
        if not fs:
            raise ShapeMismatchError("need at least one factor matrix")
        r = w.shape[0]
        for k, f in enumerate(fs):
            if f.ndim != 2:
                raise ShapeMismatchError(f"factor {k} is not a matrix")
            if f.shape[1] != r:
                raise RankMismatchError(f"factor {k} has {f.shape[1]} columns, expected {r}")
        if np.any(w < 0) or any(np.any(f < 0) for f in fs):
            raise ValueError("weights and factor entries must be non-negative")
        self.weights = _freeze(w)
        self.factors = tuple(_freeze(f) for f in fs)

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(f.shape[0]) for f in self.factors)

    def mutable_copy(self) -> tuple[np.ndarray, list[np.ndarray]]:
        """Writable (weights, factors) copies for solver-internal use."""
        return self.weights.copy(), [f.copy() for f in self.factors]

    def __repr__(self):
        return f"KruskalModel(shape={self.shape}, rank={self.rank})"


def make_sparse(shape: Sequence[int], coords, values) -> SparseCountTensor:
    """Validate and canonicalize coordinate data into a SparseCountTensor.

    coords are 0-based multi-indices (any sequence of length-d sequences or an
    (n, d) array); values are strictly positive integers. Entries are sorted
    lexicographically; duplicate coordinates are an error, not merged.
    """
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ShapeMismatchError(f"all dimensions must be positive, got {shape}")
    d = len(shape)
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size == 0:
        coords = coords.reshape(0, d)
    if coords.ndim != 2 or coords.shape[1] != d:
        raise ShapeMismatchError(f"coords must be (n, {d}), got {coords.shape}")
    values = np.asarray(values)
    if values.shape != (coords.shape[0],):
        raise LengthMismatchError(f"{coords.shape[0]} coords but {values.shape} values")
    if values.size and not np.all(values == np.floor(values)):
        raise NonPositiveValueError("counts must be integers")
    values = values.astype(np.int64) if values.size else np.empty(0, dtype=np.int64)
    if np.any(values <= 0):
        raise NonPositiveValueError("counts must be strictly positive (zeros are implicit)")
    upper = np.array(shape, dtype=np.int64)
    if coords.size and (np.any(coords < 0) or np.any(coords >= upper)):
        bad = np.argmax(np.any((coords < 0) | (coords >= upper), axis=1))
        raise IndexOutOfBoundsError(f"coordinate {tuple(coords[bad])} outside shape {shape}")
    if coords.shape[0] > 1:
        order = np.lexsort(coords.T[::-1])
        coords = coords[order]
        values = values[order]
        dup = np.all(coords[1:] == coords[:-1], axis=1)
        if np.any(dup):
            where = int(np.argmax(dup))
            raise DuplicateCoordinateError(f"duplicate coordinate {tuple(coords[where])}")
    return SparseCountTensor(shape, coords, values)


def check_shapes(x: SparseCountTensor, m: KruskalModel) -> None:
    if x.shape != m.shape:
        raise ShapeMismatchError(f"tensor shape {x.shape} != model shape {m.shape}")


def row_products(factors, coords: np.ndarray, skip: int | None = None) -> np.ndarray:
    """Row-gathered factor products: out[n, r] = prod_{k != skip} factors[k][coords[n, k], r].

    The workhorse behind masked MTTKRP, entry evaluation, and the stochastic
    gradients; `coords` may contain repeated rows.
    """
    n = coords.shape[0]
    r = factors[0].shape[1]
    out = None
    for k, f in enumerate(factors):
        if k == skip:
            continue
        rows = f[coords[:, k]]
        out = rows if out is None else out * rows
    if out is None:  # d == 1 with skip
        out = np.ones((n, r))
    return out


def accumulate_rows(row_idx: np.ndarray, contrib: np.ndarray, nrows: int) -> np.ndarray:
    """Sum (n, R) contributions into an (nrows, R) matrix grouped by row index.

    Sequential bincount per column keeps the reduction order deterministic.
    """
    r = contrib.shape[1]
    out = np.zeros((nrows, r))
    for j in range(r):
        out[:, j] = np.bincount(row_idx, weights=contrib[:, j], minlength=nrows)
    return out


def model_entries(m: KruskalModel, coords: np.ndarray) -> np.ndarray:
    """Model values at the given multi-indices (vectorized model_entry)."""
    if coords.shape[0] == 0:
        return np.empty(0)
    return row_products(m.factors, coords) @ m.weights


def model_entry(m: KruskalModel, idx: Sequence[int]) -> float:
    """Single model entry sum_r weights[r] * prod_k factors[k][idx[k], r]."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != m.ndim:
        raise IndexOutOfBoundsError(f"index has {len(idx)} components, model has {m.ndim} modes")
    for k, (i, s) in enumerate(zip(idx, m.shape)):
        if not 0 <= i < s:
            raise IndexOutOfBoundsError(f"index {i} out of range for mode {k} of size {s}")
    return float(model_entries(m, np.array([idx], dtype=np.int64))[0])


def model_total_sum(m: KruskalModel) -> float:
    """Sum of the model over every entry, via factored column sums.

    sum_idx entry(idx) = sum_r weights[r] * prod_k colsum(factors[k][:, r]).
    """
    acc = m.weights.copy()
    for f in m.factors:
        acc *= f.sum(axis=0)
    return float(acc.sum())


def mttkrp_masked(x: SparseCountTensor, m: KruskalModel, mode: int, values) -> np.ndarray:
    """Masked matricized-tensor-times-Khatri-Rao: weights-free shared kernel.

    out[i, r] = sum over stored nonzeros with i_mode == i of
    values[n] * prod_{k != mode} factors[k][coords[n, k], r].
    """
    check_shapes(x, m)
    if not 0 <= mode < x.ndim:
        raise IndexOutOfBoundsError(f"mode {mode} invalid for {x.ndim}-way tensor")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (x.nnz,):
        raise LengthMismatchError(f"expected {x.nnz} values, got {values.shape}")
    pi = row_products(m.factors, x.coords, skip=mode)
    return accumulate_rows(x.coords[:, mode], values[:, None] * pi, x.shape[mode])


def normalize_columns(m: KruskalModel, norm: int = 2) -> KruskalModel:
    """Rescale each factor column to unit norm, absorbing scales into weights.

    Zero columns are left untouched and force the corresponding weight to 0,
    so the represented tensor is unchanged in every case. norm is 1 or 2.
    """
    if norm not in (1, 2):
        raise ValueError(f"norm must be 1 or 2, got {norm}")
    weights = m.weights.copy()
    factors = []
    for f in m.factors:
        scale = f.sum(axis=0) if norm == 1 else np.sqrt((f * f).sum(axis=0))
        weights *= scale
        safe = np.where(scale > 0, scale, 1.0)
        factors.append(f / safe)
    return KruskalModel(weights, factors)
