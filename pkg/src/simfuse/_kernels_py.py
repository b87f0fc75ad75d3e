"""NumPy fallback for the fused-search hot kernels.

Semantics are bit-identical to the compiled extension: float32 terms are
upcast per element and accumulated in float64, and the z-scored term is
``(value - mean) * (1 / std)`` with each step rounded once. The compiled
build disables FP contraction to preserve this equivalence.
"""

from __future__ import annotations

import numpy as np


def accumulate(acc: np.ndarray, mat: np.ndarray, sign: int) -> None:
    """acc += sign * mat, accumulating float32 into float64 in place."""
    if sign > 0:
        np.add(acc, mat, out=acc)
    else:
        np.subtract(acc, mat, out=acc)


def accumulate_norm(
    acc: np.ndarray, mat: np.ndarray, mean: float, inv_std: float, sign: int
) -> None:
    """acc += sign * ((mat - mean) * inv_std) in float64, in place."""
    term = mat.astype(np.float64)
    term -= mean
    term *= inv_std
    if sign > 0:
        np.add(acc, term, out=acc)
    else:
        np.subtract(acc, term, out=acc)


def count_hits(acc: np.ndarray, k: int, hits: np.ndarray) -> int:
    """Per-row hit flags for recall@k of the fused matrix.

    Row i hits when the diagonal entry ranks within the top k under
    descending value with ascending-index tie-break: fewer than k entries
    are strictly greater or tie at a smaller index.
    """
    n = acc.shape[0]
    diag = acc.diagonal()
    greater = (acc > diag[:, None]).sum(axis=1)
    ties_before = ((acc == diag[:, None]) & np.tri(n, k=-1, dtype=bool)).sum(axis=1)
    np.less(greater + ties_before, k, out=hits.view(bool))
    return int(hits.sum())
