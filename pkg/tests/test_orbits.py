import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from networkx.algorithms import isomorphism as iso

from gdnlab import graph as G
from gdnlab import orbits, wl


def nx_automorphisms(g):
    h = nx.Graph() if g.is_undirected() else nx.DiGraph()
    for v in range(g.n):
        h.add_node(v, a=tuple(g.attrs[v].tolist()))
    h.add_edges_from(g.edges)
    matcher = (iso.GraphMatcher if g.is_undirected() else iso.DiGraphMatcher)(
        h, h, node_match=lambda x, y: x["a"] == y["a"])
    return {tuple(m[i] for i in range(g.n)) for m in matcher.isomorphisms_iter()}


def nx_orbits(g):
    auts = nx_automorphisms(g)
    return {frozenset(a[i] for a in auts) for i in range(g.n)}


@pytest.mark.parametrize(
    "g, count",
    [
        (G.cycle(4), 8),
        (G.cycle(8), 16),
        (G.path(4), 2),
        (G.complete(5), 120),
        (G.empty(4), 24),
        (G.disjoint_union(G.cycle(4), G.cycle(4)), 128),
        (G.build_graph(3, [(0, 1), (1, 2), (2, 0)]), 3),
        (G.path(3, [[1.0], [0.0], [1.0]]), 2),
        (G.path(3, [[1.0], [0.0], [2.0]]), 1),
    ],
)
def test_automorphism_counts(g, count, search_backend):
    auts = orbits.automorphisms(g, search=search_backend)
    assert len(auts) == count
    assert {tuple(a) for a in auts.tolist()} == nx_automorphisms(g)


def test_orbits_of_small_examples():
    p = orbits.orbit_partition(G.path(3))
    assert p.orbits == (frozenset({0, 2}), frozenset({1}))
    assert p.orbit_of.tolist() == [0, 1, 0]
    marked = orbits.orbit_partition(G.cycle(4, [[1.0], [0.0], [0.0], [0.0]]))
    assert marked.orbits == (frozenset({0}), frozenset({1, 3}), frozenset({2}))
    assert len(orbits.orbit_partition(G.cycle(9))) == 1


def test_wl_classes_can_be_coarser_than_orbits():
    # every node is 2-regular, so WL sees one class, but triangle and square nodes never swap
    g = G.disjoint_union(G.cycle(3), G.cycle(4))
    assert len(set(wl.stable_colors(g).tolist())) == 1
    assert orbits.orbit_partition(g).orbits == (frozenset({0, 1, 2}), frozenset({3, 4, 5, 6}))


def test_pairwise_similarity():
    g = G.path(4)
    assert orbits.are_similar(g, 0, 3)
    assert orbits.are_similar(g, 1, 2)
    assert not orbits.are_similar(g, 0, 1)
    assert orbits.are_similar(g, 2, 2)
    f = orbits.find_automorphism(g, 0, 3)
    assert f.tolist() == [3, 2, 1, 0]
    assert orbits.find_automorphism(g, 0, 1) is None
    with pytest.raises(G.GraphError):
        orbits.are_similar(g, 0, 9)


def test_isomorphism():
    c8 = G.cycle(8)
    s = G.NodePermutation.random(8, np.random.default_rng(0))
    assert orbits.is_isomorphic(c8, G.permute(c8, s))
    assert not orbits.is_isomorphic(c8, G.disjoint_union(G.cycle(4), G.cycle(4)))
    assert not orbits.is_isomorphic(G.path(3), G.path(3, G.uniform_attrs(3)))


def test_budget_is_enforced():
    with pytest.raises(orbits.BudgetExceeded):
        orbits.orbit_partition(G.cycle(orbits.MAX_NODES + 1))
    with pytest.raises(orbits.BudgetExceeded):
        orbits.is_isomorphic(G.cycle(11), G.cycle(11))
    assert len(orbits.orbit_partition(G.cycle(orbits.MAX_NODES))) == 1


def test_random_graphs_match_networkx(rng, search_backend):
    for _ in range(40):
        n = int(rng.integers(1, 9))
        g = G.random_graph(n, float(rng.uniform(0.2, 0.7)), rng,
                           directed=bool(rng.random() < 0.3),
                           attr_values=[0.0, 1.0] if rng.random() < 0.4 else None)
        part = orbits.orbit_partition(g, search=search_backend)
        assert set(part.orbits) == nx_orbits(g)
        assert sorted(min(o) for o in part.orbits) == [min(o) for o in part.orbits]


@st.composite
def small_graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    edges = [e for i, j in chosen for e in ((i, j), (j, i))]
    attrs = draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=n, max_size=n))
    return G.build_graph(n, edges, [[a] for a in attrs])


@settings(max_examples=60, deadline=None)
@given(small_graphs(), st.randoms(use_true_random=False))
def test_orbits_are_relabelling_invariant(g, rnd):
    perm = list(range(g.n))
    rnd.shuffle(perm)
    s = G.NodePermutation(np.array(perm))
    a = orbits.orbit_partition(g)
    b = orbits.orbit_partition(G.permute(g, s))
    assert {frozenset(s(i) for i in o) for o in a.orbits} == set(b.orbits)


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_automorphisms_form_a_group(g):
    auts = {tuple(a) for a in orbits.automorphisms(g).tolist()}
    assert tuple(range(g.n)) in auts
    ordered = sorted(auts)
    for a in ordered[:40]:
        for b in ordered[-40:]:
            assert tuple(a[b[i]] for i in range(g.n)) in auts
    # each orbit size divides the group order
    for o in orbits.orbit_partition(g).orbits:
        assert len(auts) % len(o) == 0


def test_spec_style_examples():
    assert orbits.automorphisms(G.empty(3, [[0.0], [1.0], [2.0]])).tolist() == [[0, 1, 2]]
    assert sorted(orbits.automorphisms(G.complete(2, G.uniform_attrs(2))).tolist()) == [[0, 1], [1, 0]]
    assert orbits.are_similar(G.complete(2), 0, 1)
    marked = G.cycle(8, [[1.0]] + [[0.0]] * 7)
    assert orbits.orbit_partition(marked).orbits == tuple(
        frozenset(s) for s in ({0}, {1, 7}, {2, 6}, {3, 5}, {4}))


def test_orbits_refine_wl_classes(fixtures_dir):
    for path in sorted((fixtures_dir / "graphs").glob("*.txt")):
        if path.name.startswith(("wl_", "p3_targets")):
            continue
        g = G.read_graph(path)
        colors = wl.stable_colors(g)
        for o in orbits.orbit_partition(g).orbits:
            assert len({int(colors[v]) for v in o}) == 1


def test_orbit_members_share_attrs_and_degree(rng):
    for _ in range(30):
        g = G.random_graph(int(rng.integers(1, 8)), 0.4, rng, attr_values=[0.0, 1.0])
        deg = g.degree()
        for o in orbits.orbit_partition(g).orbits:
            assert len({tuple(g.attrs[v]) for v in o}) == 1
            assert len({int(deg[v]) for v in o}) == 1


def test_similarity_is_an_equivalence(rng):
    for _ in range(20):
        g = G.random_graph(int(rng.integers(2, 7)), 0.4, rng)
        n = g.n
        sim = np.array([[orbits.are_similar(g, i, j) for j in range(n)] for i in range(n)])
        assert sim.diagonal().all()
        assert (sim == sim.T).all()
        assert ((sim.astype(int) @ sim.astype(int) > 0) == sim).all()
        assert math.factorial(n) % len(orbits.automorphisms(g)) == 0
