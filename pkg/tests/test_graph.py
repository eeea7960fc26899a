import numpy as np
import pytest

from estguard import linalg
from estguard.graph import (DirectedGraph, comparison_matrix, cycle_graph,
                            pi_weight)


def complete_digraph(n):
    return DirectedGraph.from_edges(
        n, [(j, i) for j in range(n) for i in range(n) if i != j])


class TestTopology:
    def test_cycle_in_neighbors(self):
        g = cycle_graph(3)          # 0 -> 1 -> 2 -> 0
        assert g.in_neighbors(1) == [0]

    def test_empty_edges(self):
        g = DirectedGraph.from_edges(4, [])
        assert g.in_neighbors(2) == []

    def test_complete_in_neighbors(self):
        assert complete_digraph(3).in_neighbors(0) == [1, 2]

    def test_cycle_degrees(self):
        g = cycle_graph(3)
        for i in range(3):
            assert g.degrees(i) == (1, 1)

    def test_star_degrees(self):
        g = DirectedGraph.from_edges(3, [(1, 0), (2, 0)])
        assert g.degrees(0) == (2, 0)
        assert g.degrees(1) == (0, 1)

    def test_complete_degrees(self):
        assert complete_digraph(4).degrees(2) == (3, 3)

    def test_degree_sums_equal_edge_count(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            n = int(rng.integers(2, 11))
            edges = {(int(j), int(i)) for j, i in
                     rng.integers(0, n, size=(rng.integers(1, n * n), 2))
                     if j != i}
            g = DirectedGraph.from_edges(n, edges)
            p = sum(g.degrees(i)[0] for i in range(n))
            q = sum(g.degrees(i)[1] for i in range(n))
            assert p == q == len(g.edges)

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            DirectedGraph.from_edges(3, [(1, 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            DirectedGraph.from_edges(2, [(0, 2)])

    def test_invalid_node_id(self):
        with pytest.raises(ValueError):
            cycle_graph(3).in_neighbors(3)


class TestPiWeight:
    def test_direct_substitution(self):
        g = DirectedGraph.from_edges(3, [(0, 1), (0, 2)])   # q_0 = 2
        assert pi_weight(g, 0, 1.0) == pytest.approx(2.0 / 3.0)

    def test_isolated_node(self):
        g = DirectedGraph.from_edges(2, [(1, 0)])           # q_0 = 0
        assert pi_weight(g, 0, 0.5) == pytest.approx(1.0)

    def test_out_degree_three(self):
        g = complete_digraph(4)                             # q_i = 3
        assert pi_weight(g, 1, 2.0) == pytest.approx(1.0)

    def test_strictly_below_unstable_ratio(self):
        g = cycle_graph(5)
        for i in range(5):
            q = g.degrees(i)[1]
            assert pi_weight(g, i, 0.7) < 2.0 * 0.7 / q

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            pi_weight(cycle_graph(2), 0, 0.0)


class TestComparisonMatrix:
    def test_single_node(self):
        g = DirectedGraph.from_edges(1, [])
        assert np.array_equal(comparison_matrix(g, [1.0]), [[-2.0]])

    def test_two_cycle(self):
        g = cycle_graph(2)
        C = comparison_matrix(g, [1.0, 1.0])
        assert np.array_equal(C, [[-2.0, 1.0], [1.0, -2.0]])

    def test_two_cycle_hurwitz_eigenvalues(self):
        # symmetric 2x2 oracle: eigenvalues of [[-2,1],[1,-2]] are -1, -3
        C = comparison_matrix(cycle_graph(2), [1.0, 1.0])
        w = linalg.sym_eig(C).eigenvalues
        assert np.allclose(w, [-3.0, -1.0], atol=1e-12)
        assert w[-1] < 0

    def test_random_digraphs_hurwitz(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(2, 11))
            edges = {(int(j), int(i)) for j, i in
                     rng.integers(0, n, size=(rng.integers(n, n * n), 2))
                     if j != i}
            g = DirectedGraph.from_edges(n, edges)
            alphas = rng.uniform(0.1, 5.0, size=n)
            C = comparison_matrix(g, alphas)
            assert np.max(np.linalg.eigvals(C).real) < 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            comparison_matrix(cycle_graph(3), [1.0, 1.0])
