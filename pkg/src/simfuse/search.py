"""Exhaustive subset search over similarity-matrix stacks.

The 2^M - 1 non-empty subsets are visited in Gray-code order so each step
updates the float64 accumulator with a single matrix add or subtract instead
of re-fusing the whole subset. Drift control and determinism come from a
fixed re-summation grid: the Gray sequence is cut into blocks of
``RESUM_INTERVAL`` steps and every block starts from a fresh direct
summation. Blocks are independent, so any worker count (and any scheduling)
produces bit-identical results.
"""

from __future__ import annotations

import csv
import gzip
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from . import kernels
from .similarity import SIGMA_FLOOR, NormStats, SimilarityMatrix
from .subsets import SubsetMask, enumerate_subsets, gray_value

RESUM_INTERVAL = 64

Mode = Literal["raw", "normalized"]


@dataclass(frozen=True)
class SearchResults:
    """recall@k of every non-empty subset, in Gray traversal order."""

    mode: Mode
    m: int
    k: int
    repr_names: tuple[str, ...]
    entries: tuple[tuple[SubsetMask, int], ...]
    hit_vectors: np.ndarray | None = None  # (2^m - 1, N) bool, entry order

    def recall_by_bits(self) -> dict[int, int]:
        return {mask.bits: count for mask, count in self.entries}


@dataclass(frozen=True)
class BestPerSize:
    size: int
    recall: int
    mask: SubsetMask


class _TermStack:
    """Per-representation terms plus the scalars the kernels need."""

    def __init__(self, stack, mode: Mode, stats):
        self.mode = mode
        self.mats = [m.values for m in stack]
        if mode == "normalized":
            if stats is None or len(stats) != len(stack):
                raise ValueError("normalized mode needs one NormStats per matrix")
            self.means = [s.mean for s in stats]
            # A sub-floor std marks a constant matrix; its term is zero.
            self.inv_stds = [
                0.0 if s.std < SIGMA_FLOOR else 1.0 / s.std for s in stats
            ]
        else:
            self.means = None
            self.inv_stds = None

    def apply(self, acc: np.ndarray, index: int, sign: int) -> None:
        if self.mode == "raw":
            kernels.accumulate(acc, self.mats[index], sign)
        else:
            inv = self.inv_stds[index]
            if inv == 0.0:
                return
            kernels.accumulate_norm(acc, self.mats[index], self.means[index], inv, sign)


def _search_block(
    terms: _TermStack, n: int, k: int, start: int, stop: int, collect_hits: bool
):
    """Evaluate Gray indices [start, stop): direct sum at start, then steps."""
    acc = np.zeros((n, n), dtype=np.float64)
    hits = np.zeros(n, dtype=np.uint8)
    bits = gray_value(start)
    for j in range(len(terms.mats)):
        if bits >> j & 1:
            terms.apply(acc, j, +1)
    counts = []
    hit_rows = []
    counts.append(kernels.count_hits(acc, k, hits))
    if collect_hits:
        hit_rows.append(hits.astype(bool))
    for idx in range(start + 1, stop):
        flip = gray_value(idx) ^ gray_value(idx - 1)
        j = flip.bit_length() - 1
        sign = +1 if gray_value(idx) & flip else -1
        terms.apply(acc, j, sign)
        counts.append(kernels.count_hits(acc, k, hits))
        if collect_hits:
            hit_rows.append(hits.astype(bool))
    return counts, hit_rows


def search_all(
    stack: list[SimilarityMatrix],
    mode: Mode,
    stats: list[NormStats] | None = None,
    k: int = 1,
    workers: int = 1,
    collect_hits: bool = False,
) -> SearchResults:
    """recall@k of the fused matrix for every non-empty subset.

    Results are independent of traversal, re-summation block assignment,
    and ``workers``.
    """
    if not stack:
        raise ValueError("empty matrix stack")
    if mode not in ("raw", "normalized"):
        raise ValueError(f"unknown mode {mode!r}")
    m = len(stack)
    n = stack[0].n
    for mat in stack:
        if mat.n != n:
            raise ValueError(f"{mat.repr_name}: size {mat.n} != {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    terms = _TermStack(stack, mode, stats)
    masks = list(enumerate_subsets(m))

    total = 1 << m  # Gray indices 1 .. total-1
    blocks = [
        (start, min(start + RESUM_INTERVAL, total))
        for start in range(1, total, RESUM_INTERVAL)
    ]
    if workers <= 1 or len(blocks) == 1:
        block_results = [
            _search_block(terms, n, k, start, stop, collect_hits)
            for start, stop in blocks
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_search_block, terms, n, k, start, stop, collect_hits)
                for start, stop in blocks
            ]
            block_results = [f.result() for f in futures]

    counts: list[int] = []
    hit_rows: list[np.ndarray] = []
    for block_counts, block_hits in block_results:
        counts.extend(block_counts)
        hit_rows.extend(block_hits)
    entries = tuple(zip(masks, counts))
    hit_vectors = np.array(hit_rows, dtype=bool) if collect_hits else None
    return SearchResults(
        mode=mode,
        m=m,
        k=k,
        repr_names=tuple(mat.repr_name for mat in stack),
        entries=entries,
        hit_vectors=hit_vectors,
    )


def best_per_size(r: SearchResults) -> list[BestPerSize]:
    """Best recall over all subsets of each size, with a witness mask.

    Ties report the lowest mask value, keeping tables reproducible.
    """
    best: dict[int, tuple[int, SubsetMask]] = {}
    for mask, count in r.entries:
        size = mask.size
        cur = best.get(size)
        if cur is None or count > cur[0] or (count == cur[0] and mask.bits < cur[1].bits):
            best[size] = (count, mask)
    return [
        BestPerSize(size=size, recall=best[size][0], mask=best[size][1])
        for size in sorted(best)
    ]


def best_entry(r: SearchResults) -> tuple[SubsetMask, int]:
    """Globally best (mask, recall); ties resolve to the lowest mask value."""
    return max(r.entries, key=lambda e: (e[1], -e[0].bits))


def write_results_csv(r: SearchResults, path, gzip_output: bool = False) -> Path:
    """One row per subset: mask value, member names, size, recall.

    Rows are sorted by ascending mask value for a canonical table.
    """
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mask", "subset", "n_r", "recall"])
    for mask, count in sorted(r.entries, key=lambda e: e[0].bits):
        writer.writerow(
            [mask.bits, "+".join(mask.names(r.repr_names)), mask.size, count]
        )
    data = buf.getvalue().encode()
    if gzip_output:
        # mtime=0 keeps repeated runs byte-identical.
        with open(path, "wb") as fh:
            with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(data)
    else:
        path.write_bytes(data)
    return path


def write_best_per_size_csv(r: SearchResults, path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n_r", "best_recall", "mask", "subset"])
    for point in best_per_size(r):
        writer.writerow(
            [
                point.size,
                point.recall,
                point.mask.bits,
                "+".join(point.mask.names(r.repr_names)),
            ]
        )
    path.write_bytes(buf.getvalue().encode())
    return path
