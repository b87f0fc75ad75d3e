"""Layer-weighted patch distance and 2AFC scoring tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simfuse.patch import (
    ActivationStack,
    DistanceTable,
    LayerWeights,
    Triple2AFC,
    best_single_layer,
    channel_normalize,
    judge_2afc,
    read_activation_stack,
    read_distance_table,
    read_layer_weights,
    score_2afc,
    search_metric_combinations,
    single_layer_selector,
    weighted_layer_distance,
    write_activation_stack,
    write_distance_table,
    write_layer_weights,
)
from simfuse.tensorfile import FormatError


def _stack(*layers):
    return ActivationStack(tuple(np.asarray(l, dtype=np.float32) for l in layers))


def _rand_stack(shapes, rng, scale=1.0):
    return ActivationStack(
        tuple((rng.standard_normal(s) * scale).astype(np.float32) for s in shapes)
    )


class TestChannelNormalize:
    def test_three_four_position(self):
        stack = _stack(np.array([[[3.0, 4.0]]]))
        out = channel_normalize(stack)
        np.testing.assert_allclose(out.layers[0][0, 0], [0.6, 0.8], atol=1e-7)

    def test_zero_vector_maps_to_zero(self):
        stack = _stack(np.zeros((2, 2, 3)))
        out = channel_normalize(stack)
        assert (out.layers[0] == 0.0).all()

    def test_unit_vectors_unchanged(self):
        rng = np.random.default_rng(0)
        raw = rng.standard_normal((4, 4, 8))
        raw /= np.linalg.norm(raw, axis=2, keepdims=True)
        out = channel_normalize(_stack(raw))
        np.testing.assert_allclose(out.layers[0], raw.astype(np.float32), atol=1e-7)

    def test_norms_are_one_or_zero(self):
        rng = np.random.default_rng(1)
        raw = rng.standard_normal((5, 3, 6)).astype(np.float32)
        raw[0, 0] = 0.0
        out = channel_normalize(_stack(raw))
        norms = np.linalg.norm(out.layers[0].astype(np.float64), axis=2)
        assert norms[0, 0] == 0.0
        np.testing.assert_allclose(norms.ravel()[1:], 1.0, atol=1e-6)


class TestDistance:
    def test_identical_stacks_zero(self):
        rng = np.random.default_rng(2)
        x = channel_normalize(_rand_stack([(3, 3, 4), (2, 2, 8)], rng))
        w = LayerWeights.for_stack(x)
        assert weighted_layer_distance(x, x, w) == 0.0

    def test_analytic_one_by_one(self):
        x = _stack(np.array([[[1.0, 0.0]]]))
        x0 = _stack(np.array([[[0.0, 1.0]]]))
        w = LayerWeights.uniform([2])
        assert weighted_layer_distance(x, x0, w) == 2.0

    def test_zero_weights_zero_distance(self):
        rng = np.random.default_rng(3)
        x = channel_normalize(_rand_stack([(2, 2, 4)], rng))
        x0 = channel_normalize(_rand_stack([(2, 2, 4)], rng))
        w = LayerWeights((np.zeros(4),))
        assert weighted_layer_distance(x, x0, w) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        x = channel_normalize(_rand_stack([(3, 2, 5), (1, 4, 3)], rng))
        x0 = channel_normalize(_rand_stack([(3, 2, 5), (1, 4, 3)], rng))
        w = LayerWeights.for_stack(x)
        d1 = weighted_layer_distance(x, x0, w)
        d2 = weighted_layer_distance(x0, x, w)
        assert abs(d1 - d2) <= 1e-12

    def test_spatial_average(self):
        # Two positions with squared diffs 2 and 0 -> mean 1.
        x = _stack(np.array([[[1.0, 0.0], [1.0, 0.0]]]))
        x0 = _stack(np.array([[[0.0, 1.0], [1.0, 0.0]]]))
        w = LayerWeights.uniform([2])
        assert weighted_layer_distance(x, x0, w) == 1.0

    def test_shape_mismatch(self):
        x = _stack(np.zeros((1, 1, 2)))
        x0 = _stack(np.zeros((1, 2, 2)))
        with pytest.raises(ValueError, match="shapes"):
            weighted_layer_distance(x, x0, LayerWeights.uniform([2]))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            LayerWeights((np.array([-1.0, 1.0]),))


class TestSingleLayerSelector:
    def test_only_selected_layer_contributes(self):
        rng = np.random.default_rng(5)
        shapes = [(2, 2, 3)] * 5
        x = channel_normalize(_rand_stack(shapes, rng))
        x0 = channel_normalize(_rand_stack(shapes, rng))
        base = LayerWeights.for_stack(x)
        w4 = single_layer_selector(base, 4)
        only_last = weighted_layer_distance(
            ActivationStack(x.layers[4:]),
            ActivationStack(x0.layers[4:]),
            LayerWeights.uniform([3]),
        )
        assert weighted_layer_distance(x, x0, w4) == pytest.approx(only_last, abs=1e-12)

    def test_idempotent(self):
        base = LayerWeights.uniform([3, 4, 5])
        once = single_layer_selector(base, 1)
        twice = single_layer_selector(once, 1)
        for a, b in zip(once.weights, twice.weights):
            np.testing.assert_array_equal(a, b)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            single_layer_selector(LayerWeights.uniform([2, 2]), 2)


def _triple(ref, p0, p1, pref):
    return Triple2AFC(ref=ref, p0=p0, p1=p1, human_pref=pref)


class TestJudge:
    def test_p0_identical_to_ref(self):
        rng = np.random.default_rng(6)
        ref = _rand_stack([(2, 2, 4)], rng)
        p1 = _rand_stack([(2, 2, 4)], rng)
        t = _triple(ref, ref, p1, 0.5)
        assert judge_2afc(t, LayerWeights.for_stack(ref)) == "p0"

    def test_equal_patches_tie(self):
        rng = np.random.default_rng(7)
        ref = _rand_stack([(2, 2, 4)], rng)
        p = _rand_stack([(2, 2, 4)], rng)
        t = _triple(ref, p, ActivationStack(tuple(l.copy() for l in p.layers)), 0.3)
        assert judge_2afc(t, LayerWeights.for_stack(ref)) == "tie"

    def test_known_distances_pick_p1(self):
        # Unit vectors at cosine c give d = 2 - 2c: p0 orthogonal (d = 2),
        # p1 at c = 0.75 (d = 0.5).
        ref = _stack(np.array([[[1.0, 0.0]]]))
        p0 = _stack(np.array([[[0.0, 1.0]]]))
        p1 = _stack(np.array([[[0.75, np.sqrt(1 - 0.75**2)]]]))
        t = _triple(ref, p0, p1, 0.5)
        w = LayerWeights.uniform([2])
        assert judge_2afc(t, w) == "p1"
        d0 = weighted_layer_distance(channel_normalize(t.p0), channel_normalize(t.ref), w)
        d1 = weighted_layer_distance(channel_normalize(t.p1), channel_normalize(t.ref), w)
        assert d0 == pytest.approx(2.0, abs=1e-6)
        assert d1 == pytest.approx(0.5, abs=1e-6)

    def test_shape_agreement_enforced(self):
        with pytest.raises(ValueError, match="share"):
            _triple(
                _stack(np.zeros((1, 1, 2))),
                _stack(np.zeros((1, 1, 2))),
                _stack(np.zeros((1, 1, 3))),
                0.5,
            )

    def test_human_pref_bounds(self):
        s = _stack(np.zeros((1, 1, 2)))
        with pytest.raises(ValueError, match="human_pref"):
            _triple(s, s, s, 1.5)


class TestScore:
    def test_credit_for_p1_choice(self):
        rng = np.random.default_rng(8)
        ref = _rand_stack([(2, 2, 4)], rng)
        p0 = _rand_stack([(2, 2, 4)], rng)
        t = _triple(ref, p0, ref, 0.6)  # p1 == ref, method picks p1
        score = score_2afc([t], LayerWeights.for_stack(ref))
        assert score.score == 0.6

    def test_all_ties_half(self):
        rng = np.random.default_rng(9)
        ref = _rand_stack([(2, 2, 4)], rng)
        p = _rand_stack([(2, 2, 4)], rng)
        p_copy = ActivationStack(tuple(l.copy() for l in p.layers))
        items = [_triple(ref, p, p_copy, 0.8) for _ in range(5)]
        assert score_2afc(items, LayerWeights.for_stack(ref)).score == 0.5

    def test_empty_items_error(self):
        with pytest.raises(ValueError, match="at least one"):
            score_2afc([], LayerWeights.uniform([2]))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_label_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        shapes = [(2, 2, 3), (1, 1, 4)]
        items, swapped = [], []
        for _ in range(6):
            ref = _rand_stack(shapes, rng)
            p0 = _rand_stack(shapes, rng)
            p1 = _rand_stack(shapes, rng)
            pref = float(rng.uniform(0, 1))
            items.append(_triple(ref, p0, p1, pref))
            swapped.append(_triple(ref, p1, p0, 1.0 - pref))
        w = LayerWeights.uniform([3, 4])
        assert score_2afc(items, w).score == pytest.approx(
            score_2afc(swapped, w).score, abs=1e-12
        )

    def test_score_in_unit_interval(self):
        rng = np.random.default_rng(10)
        shapes = [(2, 2, 3)]
        items = [
            _triple(
                _rand_stack(shapes, rng),
                _rand_stack(shapes, rng),
                _rand_stack(shapes, rng),
                float(rng.uniform(0, 1)),
            )
            for _ in range(20)
        ]
        score = score_2afc(items, LayerWeights.uniform([3]))
        assert 0.0 <= score.score <= 1.0


class TestBestSingleLayer:
    def test_one_layer_stacks(self):
        rng = np.random.default_rng(11)
        items = [
            _triple(
                _rand_stack([(2, 2, 3)], rng),
                _rand_stack([(2, 2, 3)], rng),
                _rand_stack([(2, 2, 3)], rng),
                0.7,
            )
            for _ in range(4)
        ]
        layer, score, scores = best_single_layer(items, 1)
        assert layer == 0
        assert scores == [score]

    def test_planted_layer_recovered(self):
        from simfuse.synth import generate_2afc_items

        shapes = [(3, 3, 4)] * 5
        items = generate_2afc_items(40, shapes, planted_layer=1, seed=77)
        layer, score, scores = best_single_layer(items, 5)
        assert layer == 1
        assert score >= 0.9
        # Oracle: exhaustive per-layer scoring must agree with the argmax.
        template = LayerWeights.for_stack(items[0].ref)
        manual = [
            score_2afc(items, single_layer_selector(template, l)).score
            for l in range(5)
        ]
        assert manual == scores
        assert max(range(5), key=lambda l: (manual[l], -l)) == 1


class TestComboSearch:
    def _table(self, d0, d1, pref):
        d0 = np.asarray(d0, dtype=np.float64)
        m, n = d0.shape
        return DistanceTable(
            metric_names=tuple(f"met{j}" for j in range(m)),
            item_ids=tuple(f"it{j}" for j in range(n)),
            d0=d0,
            d1=np.asarray(d1, dtype=np.float64),
            human_pref=np.asarray(pref, dtype=np.float64),
        )

    def test_singleton_equals_direct_scoring(self):
        rng = np.random.default_rng(12)
        d0, d1 = rng.uniform(0, 2, (3, 10)), rng.uniform(0, 2, (3, 10))
        pref = rng.uniform(0, 1, 10)
        table = self._table(d0, d1, pref)
        result = search_metric_combinations(table)
        for j in range(3):
            entry = next(e for e in result.entries if e.bits == 1 << j)
            manual = np.where(d0[j] > d1[j], pref, 1 - pref).mean()
            assert entry.score == pytest.approx(manual, abs=1e-12)

    def test_duplicated_metric_same_score(self):
        rng = np.random.default_rng(13)
        d0, d1 = rng.uniform(0, 2, (1, 8)), rng.uniform(0, 2, (1, 8))
        pref = rng.uniform(0, 1, 8)
        table = self._table(np.vstack([d0, d0]), np.vstack([d1, d1]), pref)
        result = search_metric_combinations(table)
        scores = {e.bits: e.score for e in result.entries}
        assert scores[0b01] == scores[0b10] == scores[0b11]

    def test_exhaustive_oracle(self):
        rng = np.random.default_rng(14)
        d0, d1 = rng.uniform(0, 2, (3, 20)), rng.uniform(0, 2, (3, 20))
        pref = rng.uniform(0, 1, 20)
        table = self._table(d0, d1, pref)
        for normalized in (False, True):
            result = search_metric_combinations(table, normalized=normalized)
            dd0, dd1 = d0.copy(), d1.copy()
            if normalized:
                pooled = np.concatenate([dd0, dd1], axis=1)
                mu = pooled.mean(axis=1, keepdims=True)
                sd = pooled.std(axis=1, keepdims=True)
                dd0, dd1 = (dd0 - mu) / sd, (dd1 - mu) / sd
            best_bits, best_score = None, -1.0
            for bits in range(1, 8):
                sel = [j for j in range(3) if bits >> j & 1]
                s0, s1 = dd0[sel].sum(0), dd1[sel].sum(0)
                credit = np.where(
                    np.abs(s0 - s1) <= 1e-12, 0.5, np.where(s0 > s1, pref, 1 - pref)
                )
                score = credit.mean()
                if score > best_score:
                    best_bits, best_score = bits, score
            assert result.best.bits == best_bits
            assert result.best.score == pytest.approx(best_score, abs=1e-12)


class TestFileFormats:
    def test_activation_stack_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        stack = _rand_stack([(3, 2, 4), (1, 1, 8)], rng)
        path = write_activation_stack(tmp_path / "stack.json", stack)
        loaded = read_activation_stack(path)
        assert loaded.shapes() == stack.shapes()
        for a, b in zip(loaded.layers, stack.layers):
            assert a.tobytes() == b.tobytes()

    def test_activation_stack_truncated(self, tmp_path):
        rng = np.random.default_rng(16)
        stack = _rand_stack([(2, 2, 2)], rng)
        path = write_activation_stack(tmp_path / "stack.json", stack)
        payload = tmp_path / "stack.bin"
        payload.write_bytes(payload.read_bytes()[:-4])
        with pytest.raises(FormatError):
            read_activation_stack(path)

    def test_layer_weights_round_trip(self, tmp_path):
        w = LayerWeights((np.array([1.0, 0.5]), np.array([0.0, 2.0, 3.0])))
        path = write_layer_weights(tmp_path / "w.json", w)
        loaded = read_layer_weights(path)
        for a, b in zip(loaded.weights, w.weights):
            np.testing.assert_array_equal(a, b)

    def test_distance_table_round_trip(self, tmp_path):
        rng = np.random.default_rng(17)
        table = DistanceTable(
            metric_names=("alpha", "beta"),
            item_ids=("i0", "i1", "i2"),
            d0=rng.uniform(0, 1, (2, 3)),
            d1=rng.uniform(0, 1, (2, 3)),
            human_pref=rng.uniform(0, 1, 3),
        )
        path = write_distance_table(tmp_path / "table.csv", table)
        loaded = read_distance_table(path)
        assert loaded.metric_names == table.metric_names
        assert loaded.item_ids == table.item_ids
        np.testing.assert_array_equal(loaded.d0, table.d0)
        np.testing.assert_array_equal(loaded.d1, table.d1)
        np.testing.assert_array_equal(loaded.human_pref, table.human_pref)

    def test_distance_table_incomplete_metric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "item_id,metric,d0,d1,human_pref\n"
            "a,m1,0.1,0.2,0.5\n"
            "b,m1,0.3,0.4,0.5\n"
            "a,m2,0.5,0.6,0.5\n"
        )
        with pytest.raises(FormatError, match="cover"):
            read_distance_table(path)

    def test_distance_table_inconsistent_pref(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "item_id,metric,d0,d1,human_pref\n"
            "a,m1,0.1,0.2,0.5\n"
            "a,m2,0.5,0.6,0.7\n"
        )
        with pytest.raises(FormatError, match="inconsistent"):
            read_distance_table(path)
