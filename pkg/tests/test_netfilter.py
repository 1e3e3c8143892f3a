"""Urn-based edge filtering checked against exact binomial tails."""

import math

import numpy as np
import pytest

from multitar.netfilter import (
    WeightedDigraph,
    hard_threshold_filter,
    polya_filter,
    polya_pvalue,
)


def binomial_tail(w, s, k):
    """Oracle: exact P(X >= w) for X ~ Binomial(s, 1/k), integer arguments."""
    p = 1.0 / k
    return sum(math.comb(s, x) * p ** x * (1.0 - p) ** (s - x)
               for x in range(w, s + 1))


class TestPolyaPvalue:
    def test_zero_weight_is_certain(self):
        assert polya_pvalue(0.0, 12.5, 4, 1.0) == 1.0

    def test_single_edge_is_certain(self):
        assert polya_pvalue(7.0, 7.0, 1, 1.0) == 1.0

    def test_weight_above_strength_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            polya_pvalue(5.0, 4.0, 3, 1.0)

    def test_degree_below_one_rejected(self):
        with pytest.raises(ValueError, match="k"):
            polya_pvalue(1.0, 4.0, 0, 1.0)

    def test_negative_arguments_rejected(self):
        with pytest.raises(ValueError):
            polya_pvalue(-1.0, 4.0, 2, 1.0)
        with pytest.raises(ValueError):
            polya_pvalue(1.0, 4.0, 2, -0.5)

    def test_small_a_matches_binomial_tail(self):
        for w in range(0, 21):
            got = polya_pvalue(float(w), 20.0, 4, 1e-8)
            assert abs(got - binomial_tail(w, 20, 4)) < 1e-4

    def test_a_exactly_zero_uses_binomial_limit(self):
        for w in (1, 5, 10):
            got = polya_pvalue(float(w), 10.0, 2, 0.0)
            assert abs(got - binomial_tail(w, 10, 2)) < 1e-12

    def test_monotone_in_weight(self):
        for a in (0.1, 1.0, 10.0):
            values = [polya_pvalue(w, 30.0, 5, a) for w in np.linspace(0, 30, 61)]
            assert all(b <= x for x, b in zip(values, values[1:]))

    def test_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            s = float(rng.uniform(0.1, 50.0))
            w = float(rng.uniform(0.0, s))
            k = int(rng.integers(1, 12))
            a = float(rng.uniform(0.0, 5.0))
            p = polya_pvalue(w, s, k, a)
            assert 0.0 <= p <= 1.0


class TestWeightedDigraph:
    def test_duplicate_edge_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            WeightedDigraph(3, [0, 0], [1, 1], [1.0, 2.0])

    def test_endpoint_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            WeightedDigraph(2, [0], [2], [1.0])

    def test_non_finite_weight_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            WeightedDigraph(2, [0], [1], [np.inf])

    def test_from_dense_enumerates_all_pairs(self):
        m = np.arange(9.0).reshape(3, 3)
        g = WeightedDigraph.from_dense(m)
        assert g.n_edges == 9
        np.testing.assert_array_equal(g.weights.reshape(3, 3), m)


def complete_digraph(n, weight=1.0):
    m = np.full((n, n), weight)
    np.fill_diagonal(m, 0.0)
    src, tgt = np.nonzero(m)
    return WeightedDigraph(n, src, tgt, m[src, tgt])


class TestPolyaFilter:
    def test_equal_weights_keep_by_tie_break(self):
        g = complete_digraph(5)
        res = polya_filter(g, a=1.0, retain_fraction=0.1)
        assert res.kept.sum() == 2
        # all p equal, all |w| equal: lexicographic (source, target) wins
        kept_edges = sorted(zip(g.sources[res.kept], g.targets[res.kept]))
        assert kept_edges == [(0, 1), (0, 2)]
        assert np.allclose(res.p_values, res.p_values[0])

    def test_dominant_star_edge_has_strictly_smallest_pvalue(self):
        # hub 0 sends 99% of its strength down one edge
        n_leaves = 6
        weights = [99.0] + [1.0 / (n_leaves - 1)] * (n_leaves - 1)
        g = WeightedDigraph(
            n_leaves + 1,
            [0] * n_leaves,
            list(range(1, n_leaves + 1)),
            weights,
        )
        res = polya_filter(g, a=1.0, retain_fraction=1.0 / n_leaves)
        assert res.p_values[0] < res.p_values[1:].min()
        assert res.kept[0] and res.kept[1:].sum() == 0

    def test_retain_all(self):
        g = complete_digraph(4)
        res = polya_filter(g, a=1.0, retain_fraction=1.0)
        assert res.kept.all()
        assert res.method == "polya"

    def test_retention_accuracy(self):
        rng = np.random.default_rng(1)
        g = WeightedDigraph.from_dense(rng.lognormal(0, 1, (9, 9)))
        for frac in (0.07, 0.25, 0.5, 0.99):
            res = polya_filter(g, a=1.0, retain_fraction=frac)
            assert abs(res.kept.sum() / g.n_edges - frac) <= 1.0 / g.n_edges

    def test_kept_pvalues_below_threshold(self):
        rng = np.random.default_rng(2)
        g = WeightedDigraph.from_dense(rng.lognormal(0, 1.5, (7, 7)))
        res = polya_filter(g, a=1.0, retain_fraction=0.3)
        assert np.all(res.p_values[res.kept] <= res.threshold_used)

    def test_global_rescaling_leaves_pvalues_unchanged(self):
        rng = np.random.default_rng(3)
        w = rng.lognormal(0, 1, (8, 8)) * rng.choice((-1.0, 1.0), (8, 8))
        base = polya_filter(WeightedDigraph.from_dense(w), 1.0, 0.5)
        for c in (1e-6, 3.7, 1e8):
            scaled = polya_filter(WeightedDigraph.from_dense(c * w), 1.0, 0.5)
            np.testing.assert_allclose(scaled.p_values, base.p_values, atol=1e-10)
            np.testing.assert_array_equal(scaled.kept, base.kept)

    def test_star_source_rescaling_invariance(self):
        # each target has a single in-edge, so the min over endpoints is the
        # hub's share-based p-value and scaling the hub's edges cannot move it
        weights = np.array([5.0, 1.0, 0.25, 0.25])
        g1 = WeightedDigraph(5, [0, 0, 0, 0], [1, 2, 3, 4], weights)
        g2 = WeightedDigraph(5, [0, 0, 0, 0], [1, 2, 3, 4], 123.0 * weights)
        r1 = polya_filter(g1, 1.0, 0.5)
        r2 = polya_filter(g2, 1.0, 0.5)
        np.testing.assert_allclose(r1.p_values, r2.p_values, atol=1e-10)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        w = rng.standard_normal((6, 6))
        r1 = polya_filter(WeightedDigraph.from_dense(w), 2.0, 0.2)
        r2 = polya_filter(WeightedDigraph.from_dense(w), 2.0, 0.2)
        np.testing.assert_array_equal(r1.kept, r2.kept)
        np.testing.assert_array_equal(r1.p_values, r2.p_values)

    def test_empty_graph_rejected(self):
        g = WeightedDigraph(2, [], [], [])
        with pytest.raises(ValueError, match="empty"):
            polya_filter(g, 1.0, 0.5)

    def test_bad_retain_fraction(self):
        g = complete_digraph(3)
        with pytest.raises(ValueError, match="retain_fraction"):
            polya_filter(g, 1.0, 0.0)
        with pytest.raises(ValueError, match="retain_fraction"):
            polya_filter(g, 1.0, 1.5)


class TestHardThreshold:
    def test_top_magnitudes_kept(self):
        g = WeightedDigraph(10, list(range(10)), [(i + 1) % 10 for i in range(10)],
                            [float(v) for v in range(1, 11)])
        res = hard_threshold_filter(g, 0.3)
        assert sorted(g.weights[res.kept]) == [8.0, 9.0, 10.0]
        assert res.threshold_used == 8.0
        assert res.method == "hard_threshold"

    def test_all_equal_weights_half_kept_by_tie_break(self):
        g = complete_digraph(4)  # 12 edges
        res = hard_threshold_filter(g, 0.5)
        assert res.kept.sum() == 6
        kept_edges = sorted(zip(g.sources[res.kept], g.targets[res.kept]))
        assert kept_edges == [(0, 1), (0, 2), (0, 3), (1, 0), (1, 2), (1, 3)]

    def test_matches_sort_oracle_with_negative_weights(self):
        rng = np.random.default_rng(5)
        w = rng.standard_normal(40)
        g = WeightedDigraph(40, np.arange(40), (np.arange(40) + 1) % 40, w)
        res = hard_threshold_filter(g, 0.1)
        expected = set(np.argsort(-np.abs(w), kind="stable")[:4])
        assert set(np.flatnonzero(res.kept)) == expected

    def test_pvalues_are_nan(self):
        res = hard_threshold_filter(complete_digraph(3), 0.5)
        assert np.isnan(res.p_values).all()

    def test_retention_accuracy(self):
        rng = np.random.default_rng(6)
        g = WeightedDigraph.from_dense(rng.standard_normal((8, 8)))
        for frac in (0.05, 0.33, 0.8):
            res = hard_threshold_filter(g, frac)
            assert abs(res.kept.sum() / g.n_edges - frac) <= 1.0 / g.n_edges
