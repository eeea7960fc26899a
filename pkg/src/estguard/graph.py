"""Directed communication topology of the filter network.

Nodes are 0-based here; configuration files use 1-based ids and the
conversion happens at the config boundary only.  An edge (j, i) means node
j supplies information to node i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DirectedGraph:
    node_count: int
    edges: frozenset

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph needs at least one node")
        for (j, i) in self.edges:
            if j == i:
                raise ValueError(f"self-loop ({j},{i}) not allowed")
            if not (0 <= j < self.node_count and 0 <= i < self.node_count):
                raise ValueError(f"edge ({j},{i}) out of range for "
                                 f"{self.node_count} nodes")

    @classmethod
    def from_edges(cls, node_count: int, edges) -> "DirectedGraph":
        return cls(node_count, frozenset((int(j), int(i)) for j, i in edges))

    def _check_node(self, i: int) -> None:
        if not (0 <= i < self.node_count):
            raise ValueError(f"invalid node id {i}")

    def in_neighbors(self, i: int) -> list:
        """Nodes supplying information to i, ascending for reproducibility."""
        self._check_node(i)
        return sorted(j for (j, k) in self.edges if k == i)

    def degrees(self, i: int) -> tuple:
        """(in-degree p_i, out-degree q_i)."""
        self._check_node(i)
        p = sum(1 for (j, k) in self.edges if k == i)
        q = sum(1 for (j, k) in self.edges if j == i)
        return p, q

    def adjacency(self) -> np.ndarray:
        """a[i, j] = 1 when (j, i) is an edge."""
        a = np.zeros((self.node_count, self.node_count))
        for (j, i) in self.edges:
            a[i, j] = 1.0
        return a


def cycle_graph(n: int) -> DirectedGraph:
    """Directed cycle 0 -> 1 -> ... -> n-1 -> 0."""
    return DirectedGraph.from_edges(n, [(k, (k + 1) % n) for k in range(n)])


def pi_weight(g: DirectedGraph, i: int, alpha_i: float) -> float:
    """Coupling weight 2*alpha_i / (q_i + 1), strictly below 2*alpha_i/q_i."""
    if alpha_i <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha_i}")
    _, q = g.degrees(i)
    return 2.0 * alpha_i / (q + 1)


def comparison_matrix(g: DirectedGraph, alphas) -> np.ndarray:
    """Comparison matrix of the per-node dissipation rates.

    Entry (i, i) is -2*alpha_i and entry (i, j) is pi_j when j supplies
    node i.  Column j sums to q_j * pi_j < 2*alpha_j, so the matrix is
    strictly column diagonally dominant with negative diagonal and hence
    Hurwitz.
    """
    a = np.asarray(alphas, dtype=float)
    if a.shape != (g.node_count,):
        raise ValueError(f"alphas must have length {g.node_count}, "
                         f"got shape {a.shape}")
    if np.any(a <= 0.0):
        raise ValueError("alphas must all be positive")
    n = g.node_count
    pi = np.array([pi_weight(g, j, a[j]) for j in range(n)])
    C = np.diag(-2.0 * a)
    for (j, i) in g.edges:
        C[i, j] = pi[j]
    col_off = np.abs(C).sum(axis=0) - np.abs(np.diag(C))
    if np.any(col_off >= 2.0 * a):
        raise AssertionError("comparison matrix lost diagonal dominance")
    return C
