"""Exact automorphism orbits of small attributed graphs.

Automorphisms are found by backtracking over node images restricted to the
stable 1-WL colour classes (attributes compared exactly). The search is capped
at ``MAX_NODES`` nodes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import AttributedGraph, GraphError, NodePermutation
from .wl import histogram, joint_refine, stable_colors

MAX_NODES = 10


class BudgetExceeded(GraphError):
    pass


@dataclass(frozen=True)
class OrbitPartition:
    orbit_of: np.ndarray
    orbits: tuple  # of frozensets, ordered by smallest member

    def __len__(self):
        return len(self.orbits)


def _check_budget(g: AttributedGraph):
    if g.n > MAX_NODES:
        raise BudgetExceeded(f"brute-force orbit search is capped at {MAX_NODES} nodes, got {g.n}")


def search_order(adj: np.ndarray, colors: np.ndarray, first: int = -1) -> np.ndarray:
    """Placement order: most links to already-placed nodes first, then rarest colour."""
    n = adj.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    link = adj | adj.T
    size = Counter(colors.tolist())
    placed = []
    remaining = set(range(n))
    score = np.zeros(n, dtype=np.int64)
    if first >= 0:
        placed.append(first)
        remaining.discard(first)
        score += link[first]
    while remaining:
        v = min(remaining, key=lambda u: (-score[u], size[int(colors[u])], u))
        placed.append(v)
        remaining.discard(v)
        score += link[v]
    return np.asarray(placed, dtype=np.int64)


def _self_search(g: AttributedGraph, pin=None, limit=0, search=None):
    search = search or kernels.search
    adj = g.adjacency()
    colors = stable_colors(g)
    src, dst = pin if pin is not None else (-1, -1)
    order = search_order(adj, colors, src)
    return search(adj, adj, colors, colors, order, src, dst, limit)


def automorphisms(g: AttributedGraph, *, search=None) -> np.ndarray:
    """All automorphisms as a ``(k, n)`` array; row ``s`` maps node ``i`` to ``s[i]``."""
    _check_budget(g)
    return _self_search(g, search=search).astype(np.int64)


def automorphism_list(g: AttributedGraph) -> list:
    return [NodePermutation(row) for row in automorphisms(g)]


def find_automorphism(g: AttributedGraph, i: int, j: int, *, search=None):
    """Some automorphism mapping ``i`` to ``j``, or ``None``."""
    _check_budget(g)
    found = _self_search(g, pin=(i, j), limit=1, search=search)
    return found[0].astype(np.int64) if len(found) else None


def orbit_partition(g: AttributedGraph, *, search=None) -> OrbitPartition:
    _check_budget(g)
    parent = list(range(g.n))

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = root(x), root(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    colors = stable_colors(g)
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if colors[i] != colors[j] or root(i) == root(j):
                continue
            f = find_automorphism(g, i, j, search=search)
            if f is not None:
                # every automorphism found merges all of its cycles at once
                for v in range(g.n):
                    union(v, int(f[v]))
    groups = {}
    for v in range(g.n):
        groups.setdefault(root(v), []).append(v)
    orbits = tuple(frozenset(m) for _, m in sorted(groups.items()))
    orbit_of = np.empty(g.n, dtype=np.int64)
    for k, members in enumerate(orbits):
        orbit_of[list(members)] = k
    return OrbitPartition(orbit_of, orbits)


def are_similar(g: AttributedGraph, i: int, j: int) -> bool:
    if not (0 <= i < g.n and 0 <= j < g.n):
        raise GraphError(f"nodes ({i}, {j}) out of range for n={g.n}")
    _check_budget(g)
    return i == j or find_automorphism(g, i, j) is not None


def is_isomorphic(g1: AttributedGraph, g2: AttributedGraph, *, search=None) -> bool:
    """Exact isomorphism test (attributes preserved), brute force with WL pruning."""
    if g1.n != g2.n or len(g1.edges) != len(g2.edges) or g1.dim != g2.dim:
        return False
    if g1.n > MAX_NODES:
        raise BudgetExceeded(f"isomorphism search is capped at {MAX_NODES} nodes")
    trace, cut = joint_refine(g1, g2)
    colors = trace.stable.colors
    ca, cb = colors[:cut], colors[cut:]
    if histogram(ca) != histogram(cb):
        return False
    search = search or kernels.search
    adj_a = g1.adjacency()
    found = search(adj_a, g2.adjacency(), ca, cb, search_order(adj_a, ca), -1, -1, 1)
    return len(found) > 0
