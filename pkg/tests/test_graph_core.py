from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from undulab import graph_core as gc


def brute_cliques(g: gc.Graph) -> set[frozenset[int]]:
    adj = g.adjacency()
    subsets = [frozenset(s) for k in range(1, g.node_count + 1)
               for s in itertools.combinations(range(g.node_count), k)
               if all(b in adj[a] for a, b in itertools.combinations(s, 2))]
    every = set(subsets)
    return {s for s in every
            if not any(s | {v} in every for v in range(g.node_count) if v not in s)}


def to_nx(g: gc.Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.node_count))
    h.add_edges_from(g.edges)
    return h


def complete(n):
    return gc.Graph.from_edges(n, itertools.combinations(range(n), 2))


def cycle(n):
    return gc.Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def petersen():
    return gc.Graph.from_edges(10, [(i, (i + 1) % 5) for i in range(5)]
                               + [(i, i + 5) for i in range(5)]
                               + [(5 + i, 5 + (i + 2) % 5) for i in range(5)])


graphs = st.integers(1, 9).flatmap(
    lambda n: st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                      .filter(lambda e: e[0] != e[1]), max_size=n * (n - 1) // 2)
    .map(lambda es: gc.Graph.from_edges(n, es)))


class TestGraphType:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            gc.Graph(3, {(1, 1): gc.LOCAL})

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            gc.Graph(2, {(0, 2): gc.LOCAL})

    def test_local_tag_must_match_lattice(self):
        g = gc.build_lattice_with_shortcuts(4, 1, 0.0, 0)
        with pytest.raises(ValueError):
            gc.Graph(g.node_count, {(0, 2): gc.LOCAL}, g.positions, g.side)
        with pytest.raises(ValueError):
            gc.Graph(g.node_count, {(0, 1): gc.TRANSLOCAL}, g.positions, g.side)

    def test_text_round_trip(self, tmp_path):
        g = gc.build_lattice_with_shortcuts(5, 2, 0.3, 11)
        path = tmp_path / "g.txt"
        g.save(path)
        h = gc.Graph.load(path)
        assert h.node_count == g.node_count and h.edges == g.edges
        assert h.to_text() == path.read_text()

    def test_text_header_required(self):
        with pytest.raises(ValueError):
            gc.Graph.from_text("0 1 L\n")

    def test_text_duplicate_rejected(self):
        with pytest.raises(ValueError):
            gc.Graph.from_text("nodes=3\n0 1 L\n1 0 L\n")


class TestLattice:
    def test_square_lattice_counts(self):
        g = gc.build_lattice_with_shortcuts(4, 2, 0.0, 123)
        assert g.node_count == 16
        assert g.edge_count(gc.LOCAL) == 32
        assert g.edge_count(gc.TRANSLOCAL) == 0

    def test_degenerate_ring(self):
        g = gc.build_lattice_with_shortcuts(2, 1, 0.0, 5)
        assert g.node_count == 2 and g.edge_count() == 1

    def test_shortcut_count_binomial(self):
        counts = [gc.build_lattice_with_shortcuts(8, 2, 0.1, s).edge_count(gc.TRANSLOCAL)
                  for s in range(200)]
        mean, sd = 64 * 0.1, math.sqrt(64 * 0.1 * 0.9)
        assert abs(np.mean(counts) - mean) <= 3 * sd / math.sqrt(200)

    def test_seed_reproducible(self):
        a = gc.build_lattice_with_shortcuts(6, 2, 0.2, 9)
        b = gc.build_lattice_with_shortcuts(6, 2, 0.2, 9)
        assert a.edges == b.edges

    @pytest.mark.parametrize("side,dims", [(1, 2), (4, 4), (4, 0)])
    def test_invalid(self, side, dims):
        with pytest.raises(ValueError):
            gc.build_lattice_with_shortcuts(side, dims, 0.0, 0)


class TestCliques:
    def test_complete(self):
        assert gc.enumerate_max_cliques(complete(4)) == [gc.Clique((0, 1, 2, 3))]

    def test_triangle_with_pendant(self):
        g = gc.Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
        assert [c.members for c in gc.enumerate_max_cliques(g)] == [(0, 1, 2), (2, 3)]

    def test_petersen(self):
        cl = gc.enumerate_max_cliques(petersen())
        assert len(cl) == 15 and all(len(c) == 2 for c in cl)

    def test_empty_graph(self):
        assert gc.enumerate_max_cliques(gc.Graph(0)) == []

    def test_min_size_filters(self):
        g = gc.Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
        assert [c.members for c in gc.enumerate_max_cliques(g, 3)] == [(0, 1, 2)]

    def test_random_corpus_matches_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(1, 13))
            g = gc.erdos_renyi(n, float(rng.uniform(0.1, 0.9)), int(rng.integers(10 ** 6)))
            fast = {frozenset(c.members) for c in gc.enumerate_max_cliques(g)}
            assert fast == brute_cliques(g)

    @settings(max_examples=60, deadline=None)
    @given(graphs)
    def test_matches_networkx(self, g):
        ours = {frozenset(c.members) for c in gc.enumerate_max_cliques(g)}
        theirs = {frozenset(c) for c in nx.find_cliques(to_nx(g))}
        assert ours == theirs

    @settings(max_examples=60, deadline=None)
    @given(graphs)
    def test_sorted_and_maximal(self, g):
        cl = gc.enumerate_max_cliques(g)
        assert cl == sorted(cl)
        adj = g.adjacency()
        for c in cl:
            assert list(c.members) == sorted(c.members)
            common = set(range(g.node_count)) - set(c.members)
            for u in c.members:
                common &= adj[u]
            assert not common


class TestCliqueGraph:
    @pytest.mark.parametrize("n", range(1, 8))
    def test_complete_collapses(self, n):
        lvl = gc.clique_graph(complete(n))
        assert lvl.graph.node_count == 1 and lvl.graph.edge_count() == 0

    def test_path_overlap_one(self):
        lvl = gc.clique_graph(gc.Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)]))
        assert [sorted(lvl.lineage[i]) for i in range(3)] == [[0, 1], [1, 2], [2, 3]]
        assert set(lvl.graph.edges) == {(0, 1), (1, 2)}

    def test_path_overlap_two(self):
        lvl = gc.clique_graph(gc.Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)]), overlap_min=2)
        assert lvl.graph.node_count == 3 and lvl.graph.edge_count() == 0

    def test_invalid_overlap(self):
        with pytest.raises(ValueError):
            gc.clique_graph(complete(3), overlap_min=0)

    @settings(max_examples=40, deadline=None)
    @given(graphs)
    def test_lineage_covers_clique_nodes(self, g):
        lvl = gc.clique_graph(g)
        covered = set().union(*lvl.lineage.values()) if lvl.lineage else set()
        assert covered == set(range(g.node_count))


class TestRenormalize:
    def test_k3(self):
        res = gc.renormalize(complete(3))
        assert res.fixed_point and res.fixed_level == 1
        assert res.levels[1].graph.node_count == 1

    def test_c5(self):
        res = gc.renormalize(cycle(5))
        assert res.fixed_point and res.fixed_level <= 2
        assert nx.is_isomorphic(to_nx(res.levels[1].graph), to_nx(cycle(5)))

    def test_edgeless_fixed(self):
        res = gc.renormalize(gc.Graph(4), min_size=1)
        assert res.fixed_point
        assert res.levels[1].graph.node_count == 4 and res.levels[1].graph.edge_count() == 0

    @pytest.mark.parametrize("n", range(2, 9))
    def test_complete_to_point(self, n):
        res = gc.renormalize(complete(n))
        assert res.fixed_point and res.levels[-1].graph.node_count == 1

    def test_undecided_above_bound(self):
        res = gc.renormalize(cycle(20))
        assert res.status == gc.UNDECIDED

    def test_level_zero_identity(self):
        res = gc.renormalize(cycle(6), max_steps=1)
        assert res.levels[0].lineage == {i: frozenset({i}) for i in range(6)}

    @settings(max_examples=80, deadline=None)
    @given(graphs, graphs)
    def test_isomorphism_matches_networkx(self, a, b):
        assert gc.is_isomorphic(a, b) == nx.is_isomorphic(to_nx(a), to_nx(b))

    @settings(max_examples=40, deadline=None)
    @given(graphs, st.randoms(use_true_random=False))
    def test_isomorphic_to_relabeling(self, g, rnd):
        perm = list(range(g.node_count))
        rnd.shuffle(perm)
        h = gc.Graph.from_edges(g.node_count, [(perm[u], perm[v]) for u, v in g.edges])
        assert gc.is_isomorphic(g, h)


class TestConnectivity:
    def test_complete_bipartite(self):
        g = gc.Graph.from_edges(5, [(a, b) for a in (0, 1) for b in (2, 3, 4)])
        assert gc.connectivity(g, {0, 1}, {2, 3, 4}) == 1.0

    def test_no_interbonds(self):
        assert gc.connectivity(gc.Graph.from_edges(4, [(0, 1)]), {0, 1}, {2, 3}) == 0.0

    def test_direct_count(self):
        g = gc.Graph.from_edges(5, [(0, 2), (1, 4), (2, 3)])
        assert gc.connectivity(g, {0, 1}, {2, 3, 4}) == pytest.approx(2 / 6)

    @pytest.mark.parametrize("s1,s2", [({0}, {0, 1}), (set(), {1})])
    def test_invalid_sets(self, s1, s2):
        with pytest.raises(ValueError):
            gc.connectivity(complete(3), s1, s2)

    @settings(max_examples=50, deadline=None)
    @given(graphs, st.data())
    def test_symmetric_and_bounded(self, g, data):
        if g.node_count < 2:
            return
        nodes = list(range(g.node_count))
        k = data.draw(st.integers(1, g.node_count - 1))
        s1 = set(nodes[:k])
        s2 = set(nodes[k:])
        c = gc.connectivity(g, s1, s2)
        assert c == gc.connectivity(g, s2, s1)
        assert 0.0 <= c <= 1.0

    def test_large_counts(self):
        assert gc.log10_connectivity_from_counts(1e79, 1e75, 1e75) == -71.0
        assert gc.connectivity_from_counts(1e79, 1e75, 1e75) == 1e-71

    def test_zero_and_full(self):
        assert gc.connectivity_from_counts(0, 10.0, 20.0) == 0.0
        assert gc.connectivity_from_counts(200.0, 10.0, 20.0) == pytest.approx(1.0)

    def test_excess_rejected(self):
        with pytest.raises(ValueError):
            gc.connectivity_from_counts(201.0, 10.0, 20.0)


class TestSpreading:
    def test_additive(self):
        g = gc.erdos_renyi(40, 0.2, 3)
        rep = gc.spreading_statistic(g, range(10), [range(10, 20), range(20, 30)])
        assert rep.union_count == sum(rep.part_counts)

    def test_empty_graph(self):
        rep = gc.spreading_statistic(gc.Graph(10), [0, 1], [[2, 3], [4]])
        assert rep.union_count == 0 and rep.part_counts == [0, 0]

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            gc.spreading_statistic(gc.Graph(5), [0], [[1, 2], [2, 3]])

    def test_binomial_ensemble(self):
        rep = gc.spreading_ensemble(200, 0.05, 20, 4, 20, range(100))
        counts = np.asarray(rep["counts"])
        assert np.all(np.abs(counts - rep["binomial_mean"]) <= 4 * rep["binomial_std"] + 1)
        assert abs(rep["mean"] - rep["binomial_mean"]) <= 4 * rep["binomial_std"] / 20


class TestRewire:
    def lattice(self):
        return gc.build_lattice_with_shortcuts(6, 2, 0.4, 1)

    def test_zero_probability_is_identity(self):
        g = self.lattice()
        phases = np.random.default_rng(0).uniform(0, 2 * np.pi, g.node_count)
        assert gc.rewire_step(g, phases, 1.0, 0.0, 5).edges == g.edges

    def test_equal_phases_no_removal(self):
        g = self.lattice()
        h = gc.rewire_step(g, np.zeros(g.node_count), np.pi, 1.0, 5)
        assert set(g.edges) <= set(h.edges)

    def test_two_clusters_cut(self):
        g = self.lattice()
        phases = np.where(g.positions[:, 0] < 3, 0.0, np.pi)
        h = gc.rewire_step(g, phases, np.pi / 2, 1.0, 5)
        for (u, v), kind in h.edges.items():
            if kind == gc.TRANSLOCAL:
                assert phases[u] == phases[v]

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            gc.rewire_step(self.lattice(), np.zeros(36), 4.0, 0.5, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.floats(0.05, np.pi), st.floats(0, 1))
    def test_local_edges_untouched(self, seed, threshold, prob):
        g = self.lattice()
        phases = np.random.default_rng(seed).uniform(0, 2 * np.pi, g.node_count)
        h = gc.rewire_step(g, phases, threshold, prob, seed)
        assert h.node_count == g.node_count
        local = lambda x: {e for e, k in x.edges.items() if k == gc.LOCAL}
        assert local(h) == local(g)
        assert h.edges == gc.rewire_step(g, phases, threshold, prob, seed).edges
