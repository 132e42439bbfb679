import numpy as np
import pytest

from fdcausal.errors import InvalidArgumentError
from fdcausal.graphs import MixedGraph, colliders, unshielded_triples
from fdcausal.metrics import precision, recall, score_graphs, shd, shd_norm


def graph(d, directed=(), undirected=()):
    g = MixedGraph.empty(d)
    for i, j in directed:
        g.add_directed(i, j)
    for i, j in undirected:
        g.add_undirected(i, j)
    return g


def random_mixed_graph(d, rng):
    g = MixedGraph.empty(d)
    for i in range(d):
        for j in range(i + 1, d):
            r = rng.random()
            if r < 0.25:
                g.add_directed(i, j)
            elif r < 0.5:
                g.add_directed(j, i)
            elif r < 0.65:
                g.add_undirected(i, j)
    return g


class TestMixedGraph:
    def test_adjacency_convention(self):
        g = graph(3, directed=[(0, 1)], undirected=[(1, 2)])
        A = g.adjacency()
        assert A[0, 1] == 1 and A[1, 0] == 0
        assert A[1, 2] == 1 and A[2, 1] == 1

    def test_no_self_loops(self):
        g = MixedGraph.empty(2)
        with pytest.raises(InvalidArgumentError):
            g.add_directed(0, 0)

    def test_edge_sets_stay_disjoint(self):
        g = graph(2, directed=[(0, 1)])
        g.add_undirected(0, 1)
        assert not g.directed and g.has_undirected(0, 1)

    def test_as_dag_rejects_undirected(self):
        with pytest.raises(InvalidArgumentError):
            graph(2, undirected=[(0, 1)]).as_dag()

    def test_as_dag_rejects_cycle(self):
        with pytest.raises(InvalidArgumentError):
            graph(3, directed=[(0, 1), (1, 2), (2, 0)]).as_dag()

    def test_topological_order(self):
        g = graph(4, directed=[(2, 0), (0, 1), (1, 3)])
        order = g.topological_order()
        assert order.index(2) < order.index(0) < order.index(1) < order.index(3)

    def test_json_round_trip(self):
        g = graph(4, directed=[(0, 1), (2, 3)], undirected=[(1, 2)])
        assert MixedGraph.from_json(g.to_json()) == g

    def test_unshielded_triples_and_colliders(self):
        g = graph(3, directed=[(0, 2), (1, 2)])
        assert list(unshielded_triples(g)) == [(0, 2, 1)]
        assert colliders(g) == {(0, 2, 1)}
        shielded = graph(3, directed=[(0, 2), (1, 2)], undirected=[(0, 1)])
        assert colliders(shielded) == set()


class TestShd:
    def test_identical_graphs(self):
        g = graph(3, directed=[(0, 1)])
        assert shd(g, g) == 0

    def test_reversed_edge_costs_two(self):
        assert shd(graph(2, directed=[(0, 1)]), graph(2, directed=[(1, 0)])) == 2

    def test_undirected_vs_directed_costs_one(self):
        assert shd(graph(2, undirected=[(0, 1)]), graph(2, directed=[(0, 1)])) == 1

    def test_norm(self):
        g1 = graph(3, directed=[(0, 1), (1, 2)])
        g2 = graph(3, directed=[(0, 1)])
        assert shd(g1, g2) == 1
        assert shd_norm(g1, g2) == pytest.approx(1 / 6)

    def test_complete_reversal_norm_one(self):
        g1 = graph(3, directed=[(0, 1), (0, 2), (1, 2)])
        g2 = graph(3, directed=[(1, 0), (2, 0), (2, 1)])
        assert shd(g1, g2) == 6
        assert shd_norm(g1, g2) == 1.0

    def test_size_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            shd(graph(2), graph(3))

    def test_symmetry_triangle_and_reversal_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            d = int(rng.integers(2, 6))
            g1, g2, g3 = (random_mixed_graph(d, rng) for _ in range(3))
            assert shd(g1, g2) == shd(g2, g1)
            assert shd(g1, g3) <= shd(g1, g2) + shd(g2, g3)
            assert (shd(g1, g2) == 0) == np.array_equal(g1.adjacency(), g2.adjacency())

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            d = 4
            g1, g2 = random_mixed_graph(d, rng), random_mixed_graph(d, rng)
            perm = rng.permutation(d)
            def relabel(g):
                out = MixedGraph.empty(d)
                for i, j in g.directed:
                    out.add_directed(int(perm[i]), int(perm[j]))
                for e in g.undirected:
                    i, j = tuple(e)
                    out.add_undirected(int(perm[i]), int(perm[j]))
                return out
            assert shd(relabel(g1), relabel(g2)) == shd(g1, g2)


class TestPrecisionRecall:
    def test_all_correct(self):
        learned = graph(3, directed=[(0, 1), (1, 2)])
        assert precision(learned, learned) == 1.0

    def test_one_correct_one_reversed(self):
        learned = graph(3, directed=[(0, 1), (2, 1)])
        truth = graph(3, directed=[(0, 1), (1, 2)])
        assert precision(learned, truth) == 0.5

    def test_no_oriented_edges_undefined(self):
        learned = graph(3, undirected=[(0, 1)])
        truth = graph(3, directed=[(0, 1)])
        assert precision(learned, truth) is None

    def test_recall_fully_directed(self):
        assert recall(graph(3, directed=[(0, 1)])) == 1.0

    def test_recall_mixed(self):
        g = graph(5, directed=[(0, 1), (1, 2)], undirected=[(2, 3), (3, 4)])
        assert recall(g) == 0.5

    def test_recall_empty_graph_undefined(self):
        assert recall(graph(3)) is None

    def test_score_graphs_json(self):
        learned = graph(3, directed=[(0, 1)], undirected=[(1, 2)])
        truth = graph(3, directed=[(0, 1), (1, 2)])
        payload = score_graphs(learned, truth).to_json()
        assert payload["shd"] == 1
        assert payload["precision"] == 1.0
        assert payload["recall"] == 0.5
