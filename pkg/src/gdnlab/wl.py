"""1-WL colour refinement and the indistinguishability oracle.

Round 0 colours are the classes of exactly equal attribute vectors. Each later
round recolours a node by ``(own colour, sorted in-neighbour colours)``; the
distinct keys are sorted lexicographically and numbered ``0..k-1`` so colour
ids are deterministic and comparable across graphs refined jointly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graph import AttributedGraph, disjoint_union


@dataclass(frozen=True)
class Coloring:
    colors: np.ndarray
    round: int

    @property
    def num_classes(self) -> int:
        return int(self.colors.max()) + 1 if self.colors.size else 0

    def classes(self) -> list:
        out = [[] for _ in range(self.num_classes)]
        for v, c in enumerate(self.colors):
            out[c].append(v)
        return [set(c) for c in out]


@dataclass
class RefinementTrace:
    colorings: list = field(default_factory=list)
    stable_round: int = 0

    @property
    def histograms(self) -> list:
        return [histogram(c.colors) for c in self.colorings]

    @property
    def stable(self) -> Coloring:
        return self.colorings[self.stable_round]


def histogram(colors) -> tuple:
    return tuple(sorted(Counter(int(c) for c in colors).items()))


def _canonical(keys) -> np.ndarray:
    table = {k: i for i, k in enumerate(sorted(set(keys)))}
    return np.array([table[k] for k in keys], dtype=np.int64)


def initial_colors(g: AttributedGraph) -> np.ndarray:
    return _canonical([tuple(row) for row in g.attrs.tolist()])


def _same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    # refinement only splits classes, so equal class counts means equal partitions
    return len(set(a.tolist())) == len(set(b.tolist()))


def in_lists(g: AttributedGraph) -> list:
    ins = [[] for _ in range(g.n)]
    for i, j in g.edges:
        ins[j].append(i)
    return ins


def refine_step(colors: np.ndarray, ins: list) -> np.ndarray:
    c = colors.tolist()
    keys = [(c[v], tuple(sorted(c[u] for u in ins[v]))) for v in range(len(c))]
    return _canonical(keys)


def wl_refine(g: AttributedGraph) -> RefinementTrace:
    """Refine to stabilisation; ``stable_round`` is the first round whose successor
    induces the same partition (capped at ``n``)."""
    trace = RefinementTrace()
    colors = initial_colors(g)
    trace.colorings.append(Coloring(colors, 0))
    ins = in_lists(g)
    for t in range(max(g.n, 1)):
        nxt = refine_step(colors, ins)
        if _same_partition(colors, nxt):
            trace.stable_round = t
            return trace
        colors = nxt
        trace.colorings.append(Coloring(colors, t + 1))
    trace.stable_round = len(trace.colorings) - 1
    return trace


def stable_colors(g: AttributedGraph) -> np.ndarray:
    return wl_refine(g).stable.colors


def joint_refine(g1: AttributedGraph, g2: AttributedGraph):
    """Refine the disjoint union; returns the trace and the split point ``g1.n``."""
    return wl_refine(disjoint_union(g1, g2)), g1.n


def wl_indistinguishable(g1: AttributedGraph, g2: AttributedGraph) -> bool:
    if g1.n != g2.n or g1.dim != g2.dim:
        return False
    trace, cut = joint_refine(g1, g2)
    for col in trace.colorings:
        if histogram(col.colors[:cut]) != histogram(col.colors[cut:]):
            return False
    # the confirming round after stabilisation must agree as well
    final = refine_step(trace.stable.colors, in_lists(disjoint_union(g1, g2)))
    return histogram(final[:cut]) == histogram(final[cut:])
