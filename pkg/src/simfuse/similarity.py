"""Cosine similarity matrices, fusion, rankings, and recall.

Matrices are stored float32 (an N=6016 gallery needs eleven 145 MB
matrices); every reduction — dot products, statistics, fused sums — runs in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import FeatureSet
from .subsets import SubsetMask

# Fused/normalized matrices legitimately leave [-1, 1]; this bound only
# applies to cosine products of (tolerance 1e-4) unit rows.
COSINE_BOUND = 1.0 + 2.5e-4
# A representation whose similarity values are (numerically) constant
# carries no ranking information; its z-scored term is treated as zero.
SIGMA_FLOOR = 1e-9

_MATMUL_CHUNK = 1024  # rows per float64 GEMM block, bounds temp memory


@dataclass(frozen=True)
class SimilarityMatrix:
    """N x N similarities; values[i][j] compares left item i to right item j."""

    repr_name: str
    values: np.ndarray  # (n, n) float32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 1:
            raise ValueError(f"similarity matrix must be square, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError(f"{self.repr_name}: similarity matrix contains NaN or Inf")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NormStats:
    """Mean and population standard deviation of one matrix's values."""

    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0.0:
            raise ValueError("std must be non-negative")


@dataclass(frozen=True)
class Ranking:
    """Gallery order for one query: descending similarity, ties by index."""

    query: int
    order: np.ndarray  # permutation of [0..N), int64


@dataclass(frozen=True)
class RecallResult:
    k: int
    count: int
    hits: np.ndarray  # (N,) bool


def cosine_similarity_matrix(left: FeatureSet, right: FeatureSet) -> SimilarityMatrix:
    """All-pairs dot products of unit rows, float64 GEMM, float32 result.

    Both sides must hold validated unit-norm rows of equal dimension; the
    dot product then equals the cosine.
    """
    if left.dim != right.dim:
        raise ValueError(
            f"{left.repr_name}: left dim {left.dim} != right dim {right.dim}"
        )
    if left.n_items != right.n_items:
        raise ValueError(
            f"{left.repr_name}: left n={left.n_items} != right n={right.n_items}"
        )
    n = left.n_items
    right_t = right.rows.astype(np.float64).T
    values = np.empty((n, n), dtype=np.float32)
    for start in range(0, n, _MATMUL_CHUNK):
        stop = min(start + _MATMUL_CHUNK, n)
        block = left.rows[start:stop].astype(np.float64) @ right_t
        values[start:stop] = block.astype(np.float32)
    peak = float(np.abs(values).max())
    if peak > COSINE_BOUND:
        raise ValueError(
            f"{left.repr_name}: cosine magnitude {peak} exceeds {COSINE_BOUND}; "
            "rows are not unit-norm"
        )
    return SimilarityMatrix(repr_name=left.repr_name, values=values)


def matrix_stats(m: SimilarityMatrix, off_diagonal: bool = False) -> NormStats:
    """Mean and population std (divisor N^2) over all entries, in float64.

    ``off_diagonal`` restricts the estimate to the N^2-N off-diagonal
    entries; the default uses the full matrix.
    """
    v = m.values.astype(np.float64)
    if off_diagonal:
        mask = ~np.eye(m.n, dtype=bool)
        v = v[mask]
    mean = float(v.mean())
    std = float(v.std())
    return NormStats(mean=mean, std=std)


def _check_stack(stack: list[SimilarityMatrix], s: SubsetMask) -> int:
    if s.m != len(stack):
        raise ValueError(f"mask is over {s.m} representations, stack has {len(stack)}")
    n = stack[0].n
    for mat in stack:
        if mat.n != n:
            raise ValueError(f"{mat.repr_name}: size {mat.n} != {n}")
    return n


def combine_raw(stack: list[SimilarityMatrix], s: SubsetMask) -> SimilarityMatrix:
    """Elementwise sum of the selected matrices (entries may leave [-1, 1])."""
    n = _check_stack(stack, s)
    acc = np.zeros((n, n), dtype=np.float64)
    for k in s.members():
        acc += stack[k].values
    name = "+".join(stack[k].repr_name for k in s.members())
    return SimilarityMatrix(repr_name=name, values=acc.astype(np.float32))


def combine_normalized(
    stack: list[SimilarityMatrix],
    stats: list[NormStats],
    s: SubsetMask,
) -> SimilarityMatrix:
    """Sum of z-scored matrices: (values - mean) / std per selected k.

    Terms with std below ``SIGMA_FLOOR`` are dropped (a constant matrix
    cannot rank anything), so a degenerate representation contributes zero.
    """
    n = _check_stack(stack, s)
    if len(stats) != len(stack):
        raise ValueError(f"{len(stats)} stats for {len(stack)} matrices")
    acc = np.zeros((n, n), dtype=np.float64)
    for k in s.members():
        if stats[k].std < SIGMA_FLOOR:
            continue
        acc += (stack[k].values.astype(np.float64) - stats[k].mean) * (1.0 / stats[k].std)
    name = "+".join(stack[k].repr_name for k in s.members())
    return SimilarityMatrix(repr_name=name, values=acc.astype(np.float32))


def rank_row(m: SimilarityMatrix, i: int) -> Ranking:
    """Stable descending order of row i; ties break by ascending index."""
    if not 0 <= i < m.n:
        raise IndexError(f"query index {i} out of range for N={m.n}")
    # Negation is exact for floats, so a stable ascending sort of -row gives
    # descending values with ascending-index tie-break.
    order = np.argsort(-m.values[i], kind="stable")
    return Ranking(query=i, order=order)


def truth_ranks(values: np.ndarray) -> np.ndarray:
    """Rank of the ground-truth entry (diagonal) per query row.

    Rank counts entries strictly greater anywhere plus ties at smaller
    indices, matching ``rank_row``'s ordering exactly.
    """
    n = values.shape[0]
    diag = values.diagonal()
    greater = (values > diag[:, None]).sum(axis=1)
    ties = (values == diag[:, None]) & np.tri(n, k=-1, dtype=bool)
    return (greater + ties.sum(axis=1)).astype(np.int64)


def recall_at_k(m: SimilarityMatrix, k: int) -> RecallResult:
    """Queries whose ground-truth partner appears in the top k."""
    if not 1 <= k <= m.n:
        raise ValueError(f"k must be in [1, {m.n}], got {k}")
    hits = truth_ranks(m.values) < k
    return RecallResult(k=k, count=int(hits.sum()), hits=hits)
