"""Attributed directed graphs and node permutations.

Edges are ordered pairs ``(i, j)`` meaning node ``i`` sends to node ``j``;
``neighbors(g, j)`` therefore returns the in-neighbours that feed node ``j``'s
aggregation. Undirected graphs are stored as symmetric edge sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when a graph or permutation violates its invariants."""


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    n: int
    edges: frozenset
    attrs: np.ndarray  # shape (n, d), d may be 0

    @property
    def dim(self) -> int:
        return self.attrs.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.edges == other.edges
            and self.attrs.shape == other.attrs.shape
            and np.array_equal(self.attrs, other.attrs)
        )

    def __hash__(self):
        return hash((self.n, self.edges, self.attrs.tobytes()))

    def __repr__(self):
        return f"AttributedGraph(n={self.n}, m={len(self.edges)}, d={self.dim})"

    def adjacency(self) -> np.ndarray:
        """Boolean matrix ``A[i, j]`` true iff edge ``(i, j)`` is present."""
        a = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            src, dst = zip(*self.edges)
            a[list(src), list(dst)] = True
        return a

    def inbox(self) -> np.ndarray:
        """Aggregation mask ``M[i, j]`` true iff ``j`` is an in-neighbour of ``i``."""
        return self.adjacency().T.copy()

    def is_undirected(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)

    def degree(self) -> np.ndarray:
        """In-degree per node."""
        deg = np.zeros(self.n, dtype=np.int64)
        for _, j in self.edges:
            deg[j] += 1
        return deg


@dataclass(frozen=True, eq=False)
class NodePermutation:
    perm: np.ndarray  # perm[i] is the image of node i

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
            raise GraphError(f"not a bijection on 0..{p.size - 1}: {list(p)}")
        object.__setattr__(self, "perm", p)

    @property
    def n(self) -> int:
        return self.perm.size

    def __call__(self, i: int) -> int:
        return int(self.perm[i])

    def __eq__(self, other):
        return isinstance(other, NodePermutation) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())

    def inverse(self) -> "NodePermutation":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.n)
        return NodePermutation(inv)

    def compose(self, other: "NodePermutation") -> "NodePermutation":
        """``(self ∘ other)(i) = self(other(i))``."""
        if other.n != self.n:
            raise GraphError("permutation sizes differ")
        return NodePermutation(self.perm[other.perm])

    @classmethod
    def identity(cls, n: int) -> "NodePermutation":
        return cls(np.arange(n))

    @classmethod
    def swap(cls, n: int, i: int, j: int) -> "NodePermutation":
        p = np.arange(n)
        p[i], p[j] = j, i
        return cls(p)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "NodePermutation":
        return cls(rng.permutation(n))


def build_graph(n: int, edges: Iterable[Sequence[int]], attrs=None) -> AttributedGraph:
    """Validate and freeze a graph; duplicate edges collapse, self-loops are rejected.

    ``attrs`` may be omitted for a structure-only graph (``d = 0``).
    """
    if n < 0:
        raise GraphError("node count must be non-negative")
    if attrs is None:
        arr = np.zeros((n, 0), dtype=np.float64)
    else:
        rows = [np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in attrs]
        if len(rows) != n:
            raise GraphError(f"expected {n} attribute vectors, got {len(rows)}")
        dims = {r.shape for r in rows}
        if len(dims) > 1:
            raise GraphError(f"ragged attribute vectors: shapes {sorted(dims)}")
        arr = np.stack(rows) if rows else np.zeros((0, 0), dtype=np.float64)
        if arr.ndim != 2:
            raise GraphError("attributes must be vectors")
    es = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        es.add((i, j))
    arr.setflags(write=False)
    return AttributedGraph(n, frozenset(es), arr)


def from_adjacency(adj, attrs=None) -> AttributedGraph:
    """Graph from a boolean ``A[i, j]`` (i sends to j) matrix; the diagonal is ignored."""
    a = np.asarray(adj, dtype=bool)
    n = a.shape[0]
    src, dst = np.nonzero(a)
    return build_graph(n, [(i, j) for i, j in zip(src, dst) if i != j], attrs)


def with_attrs(g: AttributedGraph, attrs) -> AttributedGraph:
    return build_graph(g.n, g.edges, attrs)


def permute(g: AttributedGraph, sigma: NodePermutation) -> AttributedGraph:
    """Relabel nodes: node ``sigma(i)`` of the result is node ``i`` of ``g``."""
    if sigma.n != g.n:
        raise GraphError(f"permutation on {sigma.n} nodes applied to graph on {g.n}")
    p = sigma.perm
    attrs = np.empty_like(g.attrs)
    attrs[p] = g.attrs
    edges = frozenset((int(p[i]), int(p[j])) for i, j in g.edges)
    attrs.setflags(write=False)
    return AttributedGraph(g.n, edges, attrs)


def neighbors(g: AttributedGraph, i: int) -> set:
    if not 0 <= i < g.n:
        raise GraphError(f"node {i} out of range for n={g.n}")
    return {j for j, k in g.edges if k == i}


def require_undirected(g: AttributedGraph) -> None:
    if not g.is_undirected():
        raise GraphError("graph is not symmetric")


def disjoint_union(g1: AttributedGraph, g2: AttributedGraph) -> AttributedGraph:
    if g1.dim != g2.dim:
        raise GraphError("attribute dimensions differ")
    off = g1.n
    edges = list(g1.edges) + [(i + off, j + off) for i, j in g2.edges]
    return build_graph(g1.n + g2.n, edges, np.vstack([g1.attrs, g2.attrs]))


def _undirected(pairs):
    out = []
    for i, j in pairs:
        out += [(i, j), (j, i)]
    return out


def cycle(n: int, attrs=None) -> AttributedGraph:
    return build_graph(n, _undirected((i, (i + 1) % n) for i in range(n)), attrs)


def path(n: int, attrs=None) -> AttributedGraph:
    return build_graph(n, _undirected((i, i + 1) for i in range(n - 1)), attrs)


def complete(n: int, attrs=None) -> AttributedGraph:
    return build_graph(n, [(i, j) for i in range(n) for j in range(n) if i != j], attrs)


def empty(n: int, attrs=None) -> AttributedGraph:
    return build_graph(n, [], attrs)


def uniform_attrs(n: int, value: float = 0.0, dim: int = 1) -> np.ndarray:
    return np.full((n, dim), value, dtype=np.float64)


def random_graph(n: int, p: float, rng: np.random.Generator, *, directed=False, attr_values=None):
    """Erdős–Rényi graph; ``attr_values`` draws a scalar attribute per node from that pool."""
    pairs = []
    for i in range(n):
        for j in range(n):
            if i == j or (not directed and j < i):
                continue
            if rng.random() < p:
                pairs.append((i, j))
    edges = pairs if directed else _undirected(pairs)
    attrs = None
    if attr_values is not None:
        attrs = [[float(rng.choice(attr_values))] for _ in range(n)]
    return build_graph(n, edges, attrs)


# --- text fixture format -------------------------------------------------------
# line 1: "n d"; then n lines of d reals; then one "i j" line per directed edge.


def dumps(g: AttributedGraph) -> str:
    lines = [f"{g.n} {g.dim}"]
    for row in g.attrs:
        lines.append(" ".join(repr(float(x)) for x in row))
    for i, j in sorted(g.edges):
        lines.append(f"{i} {j}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> AttributedGraph:
    # d = 0 attribute rows are empty lines, so blank lines are only skipped after them
    raw = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    it = iter(raw)
    header = next((ln for ln in it if ln), None)
    if header is None:
        raise GraphError("empty graph file")
    try:
        n, d = (int(x) for x in header.split())
    except ValueError as exc:
        raise GraphError(f"bad header {header!r}") from exc
    attrs = []
    for _ in range(n):
        if d == 0:
            attrs.append([])
            continue
        line = next((ln for ln in it if ln), None)
        if line is None:
            raise GraphError("missing attribute rows")
        vals = [float(x) for x in line.split()]
        if len(vals) != d:
            raise GraphError(f"expected {d} attribute values, got {len(vals)}")
        attrs.append(vals)
    edges = []
    for ln in it:
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    arr = np.asarray(attrs, dtype=np.float64).reshape(n, d)
    return build_graph(n, edges, arr)


def read_graph(path: str | Path) -> AttributedGraph:
    return loads(Path(path).read_text(encoding="utf-8"))


def write_graph(g: AttributedGraph, path: str | Path) -> None:
    Path(path).write_text(dumps(g), encoding="utf-8")
