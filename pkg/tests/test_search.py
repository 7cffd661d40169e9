import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqa.errors import DimensionMismatch
from mqa.fusion import FusionLayout
from mqa.index import BuildParams, build_index
from mqa.search import (
    ABANDONED,
    SearchParams,
    brute_force_topk,
    greedy_search,
    incremental_distance,
)

LAYOUT_2 = FusionLayout(("a", "b"), (2, 2))


class TestSearchParams:
    def test_beam_must_cover_k(self):
        with pytest.raises(ValueError):
            SearchParams(k=10, L=5)
        with pytest.raises(ValueError):
            SearchParams(k=0)
        with pytest.raises(ValueError):
            SearchParams(framework="BOTH")


class TestIncrementalDistance:
    def test_infinite_threshold_gives_full_distance(self, rng):
        q, o = rng.normal(size=4), rng.normal(size=4)
        expected = float(np.sum((q - o) ** 2))
        assert incremental_distance(q, o, LAYOUT_2) == pytest.approx(expected)

    def test_identical_vectors_zero_at_any_threshold(self, rng):
        q = rng.normal(size=4)
        assert incremental_distance(q, q, LAYOUT_2, threshold=0.0) == 0.0

    def test_abandons_after_first_segment(self):
        # per-segment squared gaps (0.5, 0.9); tau = 0.4 kills it at segment 1
        q = np.array([np.sqrt(0.5), 0.0, np.sqrt(0.9), 0.0])
        o = np.zeros(4)
        assert incremental_distance(q, o, LAYOUT_2, threshold=0.4) is ABANDONED
        assert incremental_distance(q, o, LAYOUT_2) == pytest.approx(1.4)

    def test_abandons_on_total_beyond_threshold(self):
        q = np.array([0.5, 0.0, 0.5, 0.0])
        o = np.zeros(4)
        assert incremental_distance(q, o, LAYOUT_2, threshold=0.3) is ABANDONED

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            incremental_distance(np.zeros(3), np.zeros(4))
        with pytest.raises(DimensionMismatch):
            incremental_distance(np.zeros(3), np.zeros(3), LAYOUT_2)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1),
           st.floats(min_value=0.0, max_value=10.0))
    def test_matches_full_distance_or_proves_excess(self, seed, tau):
        rng = np.random.default_rng(seed)
        q, o = rng.normal(size=4), rng.normal(size=4)
        full = float(np.sum((q - o) ** 2))
        got = incremental_distance(q, o, LAYOUT_2, threshold=tau)
        if got is ABANDONED:
            assert full > tau
        else:
            assert got == pytest.approx(full)
            assert got <= tau


@pytest.fixture(scope="module")
def graph_1k():
    rng = np.random.default_rng(77)
    vectors = rng.normal(size=(1000, 32))
    graph = build_index(vectors, BuildParams(R=16, L_build=40, seed=8))
    return graph, vectors, rng


class TestGreedySearch:
    def test_indexed_vector_is_rank_one_with_zero_distance(self, graph_1k):
        graph, vectors, _ = graph_1k
        result = greedy_search(graph, vectors, vectors[123], SearchParams(k=5, L=20))
        assert result.hits[0] == (123, 0.0)

    def test_single_vertex_graph(self):
        vectors = np.ones((1, 4))
        graph = build_index(vectors, BuildParams(R=2, L_build=4))
        result = greedy_search(graph, vectors, np.zeros(4), SearchParams(k=10, L=10))
        assert result.ids == [0]

    def test_pruned_equals_unpruned_with_abandonment(self, graph_1k):
        graph, vectors, _ = graph_1k
        rng = np.random.default_rng(5)
        total_abandoned = 0
        for _ in range(50):
            query = rng.normal(size=32)
            for L in (10, 50, 100):
                params = SearchParams(k=10, L=L)
                pruned = greedy_search(graph, vectors, query, params)
                full = greedy_search(graph, vectors, query, params, use_pruning=False)
                assert pruned.hits == full.hits
                assert full.stats.abandoned == 0
                assert pruned.stats.full_evals <= full.stats.full_evals
                assert pruned.stats.visited == full.stats.visited
                total_abandoned += pruned.stats.abandoned
        assert total_abandoned > 0

    def test_deterministic(self, graph_1k):
        graph, vectors, _ = graph_1k
        query = np.random.default_rng(3).normal(size=32)
        a = greedy_search(graph, vectors, query, SearchParams(k=10, L=50))
        b = greedy_search(graph, vectors, query, SearchParams(k=10, L=50))
        assert a.hits == b.hits
        assert (a.stats.visited, a.stats.full_evals, a.stats.abandoned) == \
               (b.stats.visited, b.stats.full_evals, b.stats.abandoned)

    def test_monotone_beam_recall(self, graph_1k):
        graph, vectors, _ = graph_1k
        rng = np.random.default_rng(9)
        k = 10
        recalls = {L: 0 for L in (k, 2 * k, 50, 100)}
        for _ in range(30):
            query = rng.normal(size=32)
            truth = set(brute_force_topk(vectors, query, k).ids)
            for L in recalls:
                found = greedy_search(graph, vectors, query, SearchParams(k=k, L=L))
                recalls[L] += len(set(found.ids) & truth)
        values = [recalls[L] for L in sorted(recalls)]
        assert values == sorted(values)

    def test_distance_ties_order_by_vertex_id(self):
        # Duplicate points: equal distances must rank by id.
        vectors = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        graph = build_index(vectors, BuildParams(R=3, L_build=6, seed=0))
        result = greedy_search(graph, vectors, np.array([1.0, 0.0]),
                               SearchParams(k=3, L=6))
        assert result.ids == [1, 2, 3]

    def test_results_sorted_by_distance_then_id(self, graph_1k):
        graph, vectors, _ = graph_1k
        query = np.random.default_rng(11).normal(size=32)
        result = greedy_search(graph, vectors, query, SearchParams(k=20, L=60))
        assert result.hits == sorted(result.hits, key=lambda h: (h[1], h[0]))

    def test_stats_populated(self, graph_1k):
        graph, vectors, _ = graph_1k
        query = np.random.default_rng(13).normal(size=32)
        result = greedy_search(graph, vectors, query, SearchParams(k=5, L=20))
        assert result.stats.visited > 0
        assert result.stats.full_evals > 0


class TestBruteForce:
    def test_k_larger_than_n_returns_all_sorted(self, rng):
        vectors = rng.normal(size=(7, 3))
        result = brute_force_topk(vectors, np.zeros(3), k=50)
        assert len(result.hits) == 7
        dists = [d for _, d in result.hits]
        assert dists == sorted(dists)

    def test_exact_query_first(self, rng):
        vectors = rng.normal(size=(40, 6))
        result = brute_force_topk(vectors, vectors[17], k=3)
        assert result.hits[0] == (17, 0.0)

    def test_returned_never_worse_than_excluded(self, rng):
        vectors = rng.normal(size=(100, 8))
        query = rng.normal(size=8)
        result = brute_force_topk(vectors, query, k=10)
        included = set(result.ids)
        worst = max(d for _, d in result.hits)
        for i in range(100):
            if i in included:
                continue
            d = float(np.sum((vectors[i] - query) ** 2))
            assert d >= worst
