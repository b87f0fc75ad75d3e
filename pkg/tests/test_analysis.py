"""Participation, ablation, oracle, exclusive, and failure-case tests."""

from itertools import combinations

import numpy as np
import pytest

from simfuse.analysis import (
    HitSets,
    ablate,
    exclusive_contributions,
    failure_cases,
    hit_sets,
    oracle_recall,
    participation_ratio,
    report_bundle,
)
from simfuse.search import SearchResults, best_entry
from simfuse.similarity import SimilarityMatrix, rank_row
from simfuse.subsets import SubsetMask, enumerate_subsets


def _results_from_recalls(recalls: dict[int, int], m: int) -> SearchResults:
    """Synthetic SearchResults with recalls assigned per mask."""
    entries = tuple(
        (mask, recalls[mask.bits]) for mask in enumerate_subsets(m)
    )
    return SearchResults(
        mode="raw",
        m=m,
        k=1,
        repr_names=tuple(f"f{i}" for i in range(m)),
        entries=entries,
    )


def _hit(matrix_rows) -> HitSets:
    hits = np.asarray(matrix_rows, dtype=bool)
    return HitSets(tuple(f"f{i}" for i in range(hits.shape[0])), hits)


class TestParticipation:
    def test_feature_in_every_top_subset(self):
        # Feature 0 present in every size-2 subset containing it; rig recalls
        # so the top subsets are exactly those containing feature 0.
        m = 4
        recalls = {}
        for mask in enumerate_subsets(m):
            recalls[mask.bits] = 100 + mask.bits if mask.contains(0) else mask.bits
        r = _results_from_recalls(recalls, m)
        report = participation_ratio(r, size_filter=2, q_max=3)
        ratios = report.ratios()
        assert np.all(ratios[:, 0] == 1.0)

    def test_q1_is_indicator_of_best(self):
        m = 5
        rng = np.random.default_rng(0)
        recalls = {mask.bits: int(rng.integers(0, 50)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        report = participation_ratio(r, size_filter=3, q_max=1)
        size3 = [(bits, c) for bits, c in recalls.items() if bin(bits).count("1") == 3]
        best_bits = min(size3, key=lambda e: (-e[1], e[0]))[0]
        expected = [1 if best_bits >> j & 1 else 0 for j in range(m)]
        assert report.counts[0].tolist() == expected

    def test_manual_tally_m5_size2(self):
        # Hand-assigned recalls; oracle is an explicit manual tally.
        m = 5
        rng = np.random.default_rng(1)
        recalls = {mask.bits: int(rng.integers(0, 100)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        q_max = 6
        report = participation_ratio(r, size_filter=2, q_max=q_max)
        pairs = sorted(
            (bits for bits in recalls if bin(bits).count("1") == 2),
            key=lambda b: (-recalls[b], b),
        )
        for q in range(1, q_max + 1):
            for feature in range(m):
                manual = sum(1 for bits in pairs[:q] if bits >> feature & 1)
                assert report.counts[q - 1][feature] == manual

    def test_counts_sum_to_q_times_size(self):
        m = 6
        rng = np.random.default_rng(2)
        recalls = {mask.bits: int(rng.integers(0, 30)) for mask in enumerate_subsets(m)}
        report = participation_ratio(
            _results_from_recalls(recalls, m), size_filter=4, q_max=10
        )
        for q in range(1, 11):
            assert report.counts[q - 1].sum() == q * 4

    def test_too_few_subsets(self):
        recalls = {m.bits: 0 for m in enumerate_subsets(3)}
        with pytest.raises(ValueError, match="exceeds"):
            participation_ratio(_results_from_recalls(recalls, 3), size_filter=2, q_max=4)


class TestAblate:
    def test_exhaustive_scan_oracle(self):
        m = 3
        rng = np.random.default_rng(3)
        recalls = {mask.bits: int(rng.integers(0, 60)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        base = SubsetMask(bits=0b111, m=3)
        report = ablate(r, base)
        assert report.base_recall == recalls[0b111]
        for row in report.rows:
            best = max(
                c for bits, c in recalls.items() if not bits >> row.removed & 1
            )
            assert row.best_without == best
            assert row.delta == recalls[0b111] - best

    def test_size_one_base_searches_full_complement(self):
        m = 4
        rng = np.random.default_rng(4)
        recalls = {mask.bits: int(rng.integers(0, 60)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        report = ablate(r, SubsetMask(bits=0b0001, m=4))
        assert len(report.rows) == 1
        expected = max(c for bits, c in recalls.items() if not bits & 1)
        assert report.rows[0].best_without == expected

    def test_same_size_only_variant(self):
        m = 4
        rng = np.random.default_rng(5)
        recalls = {mask.bits: int(rng.integers(0, 60)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        base = SubsetMask(bits=0b0111, m=4)
        report = ablate(r, base, same_size_only=True)
        for row in report.rows:
            best = max(
                c
                for bits, c in recalls.items()
                if not bits >> row.removed & 1 and bin(bits).count("1") == 3
            )
            assert row.best_without == best

    def test_best_without_bounded_by_global_best(self):
        m = 5
        rng = np.random.default_rng(6)
        recalls = {mask.bits: int(rng.integers(0, 60)) for mask in enumerate_subsets(m)}
        r = _results_from_recalls(recalls, m)
        global_best = max(recalls.values())
        report = ablate(r, best_entry(r)[0])
        assert all(row.best_without <= global_best for row in report.rows)

    def test_absent_base_mask(self):
        recalls = {m.bits: 0 for m in enumerate_subsets(2)}
        r = _results_from_recalls(recalls, 2)
        with pytest.raises(ValueError, match="absent"):
            ablate(r, SubsetMask(bits=0b111, m=3))


class TestOracleAndExclusive:
    def test_single_representation(self):
        h = _hit([[1, 0, 1, 0]])
        assert oracle_recall(h) == 2
        report = exclusive_contributions(h)
        assert report.exclusive_counts == (2,)
        assert report.total_exclusive == report.union_count == 2

    def test_set_union_example(self):
        h = _hit([[0, 1, 1, 0], [0, 0, 1, 1]])  # hits {1,2} and {2,3}
        assert oracle_recall(h) == 3

    def test_union_by_brute_force_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            hits = rng.random((4, 30)) < 0.3
            h = _hit(hits)
            expected = len(set().union(*[set(np.flatnonzero(row)) for row in hits]))
            assert oracle_recall(h) == expected
            report = exclusive_contributions(h)
            assert report.total_exclusive <= report.union_count <= 30
            singles = hits.sum(axis=0) == 1
            assert report.total_exclusive == int(singles.sum())

    def test_disjoint_sets_total_equals_union(self):
        h = _hit([[1, 1, 0, 0, 0], [0, 0, 1, 1, 0]])
        report = exclusive_contributions(h)
        assert report.total_exclusive == report.union_count == 4

    def test_identical_sets_zero_exclusive(self):
        h = _hit([[1, 0, 1], [1, 0, 1]])
        report = exclusive_contributions(h)
        assert report.total_exclusive == 0
        assert report.union_count == 2

    def test_oracle_at_least_best_single(self):
        rng = np.random.default_rng(8)
        hits = rng.random((5, 40)) < 0.25
        h = _hit(hits)
        assert oracle_recall(h) >= int(hits.sum(axis=1).max())


class TestFailureCases:
    def test_perfect_diagonal_empty(self):
        mat = SimilarityMatrix("m", np.eye(5, dtype=np.float32))
        assert failure_cases(mat, 3) == []

    def test_constant_matrix_all_but_first(self):
        mat = SimilarityMatrix("m", np.zeros((6, 6), dtype=np.float32))
        cases = failure_cases(mat, 2)
        assert len(cases) == 5
        assert [c.query for c in cases] == [1, 2, 3, 4, 5]
        assert all(c.truth_rank == c.query for c in cases)

    def test_matches_naive_reranking(self):
        rng = np.random.default_rng(9)
        mat = SimilarityMatrix(
            "m", rng.uniform(-1, 1, size=(10, 10)).astype(np.float32)
        )
        cases = {c.query: c for c in failure_cases(mat, 5)}
        for i in range(10):
            order = rank_row(mat, i).order.tolist()
            truth_rank = order.index(i)
            if truth_rank == 0:
                assert i not in cases
            else:
                assert cases[i].top == tuple(order[:5])
                assert cases[i].truth_rank == truth_rank

    def test_top_n_bounds(self):
        mat = SimilarityMatrix("m", np.zeros((4, 4), dtype=np.float32))
        with pytest.raises(ValueError):
            failure_cases(mat, 0)
        with pytest.raises(ValueError):
            failure_cases(mat, 5)


class TestBundle:
    def test_bundle_schema(self):
        m = 4
        rng = np.random.default_rng(10)
        mats = [
            SimilarityMatrix(f"f{j}", rng.uniform(-1, 1, (8, 8)).astype(np.float32))
            for j in range(m)
        ]
        from simfuse.search import search_all

        results = search_all(mats, "raw")
        h = hit_sets(mats)
        participation = participation_ratio(results, size_filter=2, q_max=3)
        ablation = ablate(results, best_entry(results)[0])
        failures = failure_cases(mats[0], 3)
        bundle = report_bundle(results, h, participation, ablation, failures)
        assert bundle["schema_version"] == 1
        assert set(bundle) >= {
            "participation", "ablation", "oracle", "exclusive", "failures", "best",
        }
        assert bundle["oracle"] == oracle_recall(h)
