"""Post-search analyses: participation, ablation, oracle, exclusive hits.

All operations are pure functions over immutable ``SearchResults`` or hit
sets; nothing here touches feature rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .search import SearchResults, best_entry
from .similarity import SimilarityMatrix, rank_row, recall_at_k, truth_ranks
from .subsets import SubsetMask

SCHEMA_VERSION = 1

DEFAULT_SIZE_FILTER = 4
DEFAULT_Q_MAX = 15


@dataclass(frozen=True)
class ParticipationReport:
    """How often each representation appears among the top-q subsets of one size.

    ``counts[q-1][m]`` is the number of the q best subsets (recall
    descending, ties by ascending mask) containing representation m;
    the participation ratio is that count divided by q.
    """

    size_filter: int
    q_max: int
    repr_names: tuple[str, ...]
    counts: np.ndarray  # (q_max, M) int64

    def ratios(self) -> np.ndarray:
        q = np.arange(1, self.q_max + 1, dtype=np.float64)
        return self.counts / q[:, None]


@dataclass(frozen=True)
class AblationRow:
    removed: int  # representation index
    best_without: int  # best recall over subsets excluding it
    witness: SubsetMask  # a subset attaining best_without (lowest mask on ties)
    delta: int  # base recall minus best_without


@dataclass(frozen=True)
class AblationReport:
    base_mask: SubsetMask
    base_recall: int
    same_size_only: bool
    rows: tuple[AblationRow, ...]


@dataclass(frozen=True)
class HitSets:
    """Per-representation recall@1 hit flags for every query."""

    repr_names: tuple[str, ...]
    hits: np.ndarray  # (M, N) bool

    def __post_init__(self):
        hits = np.asarray(self.hits, dtype=bool)
        if hits.ndim != 2 or hits.shape[0] != len(self.repr_names):
            raise ValueError(
                f"hits shape {hits.shape} does not match {len(self.repr_names)} names"
            )
        object.__setattr__(self, "hits", hits)


@dataclass(frozen=True)
class ExclusiveReport:
    repr_names: tuple[str, ...]
    exclusive_counts: tuple[int, ...]  # queries hit by this representation alone
    total_exclusive: int
    union_count: int


@dataclass(frozen=True)
class FailureCase:
    query: int
    top: tuple[int, ...]  # first top_n retrieved gallery indices
    truth_rank: int  # actual rank of the ground-truth partner (>= 1)


def hit_sets(stack: list[SimilarityMatrix]) -> HitSets:
    """recall@1 hit vectors of each representation on its own."""
    hits = np.stack([recall_at_k(mat, 1).hits for mat in stack])
    return HitSets(repr_names=tuple(m.repr_name for m in stack), hits=hits)


def participation_ratio(
    r: SearchResults,
    size_filter: int = DEFAULT_SIZE_FILTER,
    q_max: int = DEFAULT_Q_MAX,
) -> ParticipationReport:
    """Count each representation's appearances among the leading subsets.

    Subsets of ``size_filter`` members are ranked by recall (descending,
    ties by ascending mask value); for every cutoff q <= q_max the report
    tallies how many of the top q contain each representation.
    """
    if size_filter > r.m:
        raise ValueError(f"size_filter {size_filter} exceeds M={r.m}")
    available = comb(r.m, size_filter)
    if q_max > available:
        raise ValueError(
            f"q_max {q_max} exceeds the {available} subsets of size {size_filter}"
        )
    ranked = sorted(
        (e for e in r.entries if e[0].size == size_filter),
        key=lambda e: (-e[1], e[0].bits),
    )
    counts = np.zeros((q_max, r.m), dtype=np.int64)
    running = np.zeros(r.m, dtype=np.int64)
    for q in range(1, q_max + 1):
        mask = ranked[q - 1][0]
        for j in mask.members():
            running[j] += 1
        counts[q - 1] = running
    return ParticipationReport(
        size_filter=size_filter, q_max=q_max, repr_names=r.repr_names, counts=counts
    )


def ablate(
    r: SearchResults, base_mask: SubsetMask, same_size_only: bool = False
) -> AblationReport:
    """Best achievable recall when each member of ``base_mask`` is banned.

    By default the complement search spans subsets of any size; with
    ``same_size_only`` it is restricted to subsets of the base's size.
    """
    recall_of = r.recall_by_bits()
    if base_mask.bits not in recall_of:
        raise ValueError(f"base mask {base_mask.bits:#x} absent from results")
    base_recall = recall_of[base_mask.bits]
    rows = []
    for removed in base_mask.members():
        candidates = [
            (mask, count)
            for mask, count in r.entries
            if not mask.contains(removed)
            and (not same_size_only or mask.size == base_mask.size)
        ]
        if not candidates:
            raise ValueError(
                f"no subsets of size {base_mask.size} exclude representation {removed}"
            )
        mask, count = max(candidates, key=lambda e: (e[1], -e[0].bits))
        rows.append(
            AblationRow(
                removed=removed,
                best_without=count,
                witness=mask,
                delta=base_recall - count,
            )
        )
    return AblationReport(
        base_mask=base_mask,
        base_recall=base_recall,
        same_size_only=same_size_only,
        rows=tuple(rows),
    )


def oracle_recall(h: HitSets) -> int:
    """Hits achievable when an ideal selector picks the best representation
    per query: the size of the union of all hit sets."""
    return int(h.hits.any(axis=0).sum())


def exclusive_contributions(h: HitSets) -> ExclusiveReport:
    """Queries retrieved correctly by exactly one representation."""
    totals = h.hits.sum(axis=0)
    counts = tuple(int((h.hits[m] & (totals == 1)).sum()) for m in range(h.hits.shape[0]))
    return ExclusiveReport(
        repr_names=h.repr_names,
        exclusive_counts=counts,
        total_exclusive=int(sum(counts)),
        union_count=int((totals > 0).sum()),
    )


def failure_cases(m: SimilarityMatrix, top_n: int) -> list[FailureCase]:
    """Queries whose ground truth is not ranked first, with retrieval context."""
    if not 1 <= top_n <= m.n:
        raise ValueError(f"top_n must be in [1, {m.n}], got {top_n}")
    ranks = truth_ranks(m.values)
    cases = []
    for i in np.flatnonzero(ranks > 0):
        order = rank_row(m, int(i)).order
        cases.append(
            FailureCase(
                query=int(i),
                top=tuple(int(j) for j in order[:top_n]),
                truth_rank=int(ranks[i]),
            )
        )
    return cases


def report_bundle(
    r: SearchResults,
    h: HitSets,
    participation: ParticipationReport,
    ablation: AblationReport,
    failures: list[FailureCase],
) -> dict:
    """Assemble the machine-readable analysis bundle."""
    exclusive = exclusive_contributions(h)
    best_mask, best_recall = best_entry(r)
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": r.mode,
        "k": r.k,
        "representations": list(r.repr_names),
        "best": {
            "mask": best_mask.bits,
            "subset": list(best_mask.names(r.repr_names)),
            "recall": best_recall,
        },
        "participation": {
            "size_filter": participation.size_filter,
            "q_max": participation.q_max,
            "counts": participation.counts.tolist(),
            "ratios": participation.ratios().tolist(),
        },
        "ablation": {
            "base_mask": ablation.base_mask.bits,
            "base_subset": list(ablation.base_mask.names(r.repr_names)),
            "base_recall": ablation.base_recall,
            "same_size_only": ablation.same_size_only,
            "rows": [
                {
                    "removed": r.repr_names[row.removed],
                    "best_without": row.best_without,
                    "witness_mask": row.witness.bits,
                    "witness_subset": list(row.witness.names(r.repr_names)),
                    "delta": row.delta,
                }
                for row in ablation.rows
            ],
        },
        "oracle": oracle_recall(h),
        "exclusive": {
            "per_representation": {
                name: count
                for name, count in zip(exclusive.repr_names, exclusive.exclusive_counts)
            },
            "total_exclusive": exclusive.total_exclusive,
            "union_count": exclusive.union_count,
        },
        "failures": [
            {"query": c.query, "top": list(c.top), "truth_rank": c.truth_rank}
            for c in failures
        ],
    }
