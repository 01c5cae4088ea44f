"""Graph substrate: lattices with shortcuts, maximal cliques, clique-graph
coarse-graining, interbond connectivity and phase-driven rewiring.

Edges are stored as ``(u, v)`` with ``u < v`` and tagged ``"L"`` (local,
lattice-adjacent) or ``"T"`` (translocal).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LOCAL = "L"
TRANSLOCAL = "T"
_KINDS = (LOCAL, TRANSLOCAL)

FIXED_POINT = "fixed_point"
UNDECIDED = "undecided"
NOT_REACHED = "not_reached"


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..node_count-1``.

    ``edges`` maps each normalized pair to its kind. When ``positions`` is
    given, ``side`` is the periodic extent of the lattice the nodes sit on.
    """

    node_count: int
    edges: dict[tuple[int, int], str] = field(default_factory=dict)
    positions: np.ndarray | None = None
    side: int | None = None

    def __post_init__(self):
        if self.node_count < 0:
            raise ValueError("node_count must be non-negative")
        for (u, v), kind in self.edges.items():
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not u < v:
                raise ValueError(f"edge {(u, v)} not normalized as u < v")
            if u < 0 or v >= self.node_count:
                raise ValueError(f"edge {(u, v)} out of range")
            if kind not in _KINDS:
                raise ValueError(f"unknown edge kind {kind!r}")
        if self.positions is not None:
            if self.side is None:
                raise ValueError("positions require the lattice side")
            if len(self.positions) != self.node_count:
                raise ValueError("positions length differs from node_count")
            for (u, v), kind in self.edges.items():
                adjacent = self.lattice_distance(u, v) == 1
                if adjacent != (kind == LOCAL):
                    raise ValueError(
                        f"edge {(u, v)} tagged {kind} but lattice adjacency is {adjacent}"
                    )

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]],
                   kind: str = LOCAL) -> "Graph":
        out: dict[tuple[int, int], str] = {}
        for e in edges:
            u, v = int(e[0]), int(e[1])
            k = e[2] if len(e) > 2 else kind
            out[_key(u, v)] = k
        return cls(node_count, out)

    # -- queries ---------------------------------------------------------
    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def has_edge(self, u: int, v: int) -> bool:
        return _key(u, v) in self.edges

    def edge_count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.edges)
        return sum(1 for k in self.edges.values() if k == kind)

    def lattice_distance(self, u: int, v: int) -> int:
        """Periodic Manhattan distance between two lattice nodes."""
        if self.positions is None or self.side is None:
            raise ValueError("graph has no lattice positions")
        d = np.abs(self.positions[u] - self.positions[v])
        d = np.minimum(d, self.side - d)
        return int(d.sum())

    def degree_sequence(self) -> list[int]:
        return sorted(len(a) for a in self.adjacency())

    def triangle_count(self) -> int:
        adj = self.adjacency()
        return sum(len(adj[u] & adj[v]) for u, v in self.edges) // 3

    def with_edges(self, edges: dict[tuple[int, int], str]) -> "Graph":
        return Graph(self.node_count, edges, self.positions, self.side)

    # -- text format -----------------------------------------------------
    def to_text(self) -> str:
        lines = [f"nodes={self.node_count}"]
        lines += [f"{u} {v} {k}" for (u, v), k in sorted(self.edges.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("nodes="):
            raise ValueError("missing 'nodes=<n>' header")
        n = int(lines[0][len("nodes="):])
        edges: dict[tuple[int, int], str] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'u v kind'")
            u, v, kind = int(parts[0]), int(parts[1]), parts[2]
            key = _key(u, v)
            if key in edges:
                raise ValueError(f"line {lineno}: duplicate edge {key}")
            edges[key] = kind
        return cls(n, edges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Graph":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True, order=True)
class Clique:
    members: tuple[int, ...]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class RenormalizationLevel:
    graph: Graph
    lineage: dict[int, frozenset[int]]
    level_index: int = 0


@dataclass
class RenormalizationResult:
    levels: list[RenormalizationLevel]
    status: str
    fixed_level: int | None = None

    @property
    def fixed_point(self) -> bool:
        return self.status == FIXED_POINT


# -- construction ------------------------------------------------------------

def build_lattice_with_shortcuts(side: int, dims: int, shortcut_prob: float,
                                 seed: int) -> Graph:
    """Periodic ``side**dims`` lattice plus random translocal shortcuts.

    Each node sprouts, with probability ``shortcut_prob``, one translocal
    edge to a node drawn uniformly among those it is not yet joined to and
    not lattice-adjacent to.
    """
    if dims not in (1, 2, 3):
        raise ValueError(f"dims must be 1, 2 or 3, got {dims}")
    if side < 2:
        raise ValueError(f"side must be >= 2, got {side}")
    if not 0.0 <= shortcut_prob <= 1.0:
        raise ValueError("shortcut_prob must lie in [0, 1]")
    shape = (side,) * dims
    n = side ** dims
    positions = np.array(np.unravel_index(np.arange(n), shape)).T
    edges: dict[tuple[int, int], str] = {}
    for axis in range(dims):
        shifted = positions.copy()
        shifted[:, axis] = (shifted[:, axis] + 1) % side
        nbr = np.ravel_multi_index(shifted.T, shape)
        for u, v in zip(range(n), nbr.tolist()):
            if u != v:
                edges[_key(u, v)] = LOCAL

    rng = np.random.default_rng(seed)
    sprout = rng.random(n) < shortcut_prob
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    for u in np.flatnonzero(sprout).tolist():
        # rejection sampling keeps the draw uniform over admissible targets
        admissible = n - 1 - len(adj[u])
        if admissible <= 0:
            continue
        while True:
            v = int(rng.integers(n))
            if v != u and v not in adj[u]:
                break
        edges[_key(u, v)] = TRANSLOCAL
        adj[u].add(v)
        adj[v].add(u)
    return Graph(n, edges, positions, side)


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) random graph; all edges tagged local (there is no embedding)."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph(n, {(int(u), int(v)): LOCAL for u, v in zip(iu[keep], ju[keep])})


# -- cliques -----------------------------------------------------------------

def enumerate_max_cliques(g: Graph, min_size: int = 1) -> list[Clique]:
    """All maximal cliques of ``g`` with at least ``min_size`` members.

    Bron-Kerbosch with Tomita pivoting; members sorted, list sorted.
    """
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    adj = g.adjacency()
    found: list[Clique] = []
    # explicit stack instead of recursion: (R, P, X)
    stack: list[tuple[list[int], set[int], set[int]]] = [([], set(range(g.node_count)), set())]
    while stack:
        r, p, x = stack.pop()
        if not p:
            if not x and len(r) >= min_size:
                found.append(Clique(tuple(sorted(r))))
            continue
        pivot = max(p | x, key=lambda w: len(adj[w] & p))
        for v in sorted(p - adj[pivot]):
            stack.append((r + [v], p & adj[v], x & adj[v]))
            p = p - {v}
            x = x | {v}
    found.sort()
    return found


def clique_graph(g: Graph, overlap_min: int = 1, min_size: int = 1) -> RenormalizationLevel:
    """One coarse-graining step: maximal cliques become nodes, joined when
    they share at least ``overlap_min`` members."""
    if overlap_min < 1:
        raise ValueError("overlap_min must be >= 1")
    cliques = enumerate_max_cliques(g, min_size)
    sets = [frozenset(c.members) for c in cliques]
    # cliques sharing a node are found through a node -> cliques index
    by_node: dict[int, list[int]] = {}
    for i, s in enumerate(sets):
        for u in s:
            by_node.setdefault(u, []).append(i)
    edges: dict[tuple[int, int], str] = {}
    for ids in by_node.values():
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1:]:
                if (a, b) not in edges and len(sets[a] & sets[b]) >= overlap_min:
                    edges[(a, b)] = LOCAL
    return RenormalizationLevel(Graph(len(sets), edges), dict(enumerate(sets)))


def _refine_colors(adj: list[set[int]], colors: list[int]) -> list[int]:
    """Colour refinement to a stable partition, with canonical colour ids."""
    while True:
        sigs = [(colors[u], tuple(sorted(colors[w] for w in adj[u]))) for u in range(len(adj))]
        ids = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [ids[s] for s in sigs]
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def is_isomorphic(a: Graph, b: Graph) -> bool:
    """Exact isomorphism test by refinement-pruned backtracking.

    Intended for small graphs; worst-case cost is exponential.
    """
    if a.node_count != b.node_count or a.edge_count() != b.edge_count():
        return False
    if a.degree_sequence() != b.degree_sequence():
        return False
    n = a.node_count
    # refine on the disjoint union so colour ids are comparable across graphs
    adj_a, adj_b = a.adjacency(), b.adjacency()
    union = adj_a + [{w + n for w in s} for s in adj_b]
    colors = _refine_colors(union, [0] * (2 * n))
    ca, cb = colors[:n], colors[n:]
    if sorted(ca) != sorted(cb):
        return False
    order = sorted(range(n), key=lambda u: (sum(1 for c in ca if c == ca[u]), -len(adj_a[u])))
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == n:
            return True
        u = order[i]
        for v in range(n):
            if v in used or cb[v] != ca[u]:
                continue
            if all((w in adj_a[u]) == (mapping[w] in adj_b[v]) for w in mapping):
                mapping[u] = v
                used.add(v)
                if extend(i + 1):
                    return True
                del mapping[u]
                used.discard(v)
        return False

    return extend(0)


def fingerprint(g: Graph) -> tuple:
    return (g.node_count, g.edge_count(), tuple(g.degree_sequence()), g.triangle_count())


def renormalize(g: Graph, max_steps: int = 8, overlap_min: int = 1, min_size: int = 2,
                exact_bound: int = 16) -> RenormalizationResult:
    """Iterate the clique graph until a fixed point or ``max_steps``.

    A level is a fixed point when it is a single node (or empty) or is
    isomorphic to the level before it. Isomorphism is decided exactly only
    while both graphs have at most ``exact_bound`` nodes; beyond that, equal
    invariant fingerprints give status ``undecided``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    levels = [RenormalizationLevel(g, {i: frozenset({i}) for i in range(g.node_count)}, 0)]
    for step in range(1, max_steps + 1):
        prev = levels[-1].graph
        lvl = clique_graph(prev, overlap_min, min_size)
        cur = lvl.graph
        levels.append(RenormalizationLevel(cur, lvl.lineage, step))
        if cur.node_count <= 1:
            return RenormalizationResult(levels, FIXED_POINT, step)
        if fingerprint(cur) != fingerprint(prev):
            continue
        if max(cur.node_count, prev.node_count) <= exact_bound:
            if is_isomorphic(cur, prev):
                return RenormalizationResult(levels, FIXED_POINT, step)
        else:
            return RenormalizationResult(levels, UNDECIDED, None)
    return RenormalizationResult(levels, NOT_REACHED, None)


# -- connectivity ------------------------------------------------------------

def _interbonds(g: Graph, s1: set[int], s2: set[int]) -> int:
    return sum(1 for u, v in g.edges if (u in s1 and v in s2) or (u in s2 and v in s1))


def connectivity(g: Graph, s1: Iterable[int], s2: Iterable[int]) -> float:
    """Interbond count between two disjoint node sets over its maximum."""
    a, b = set(s1), set(s2)
    if not a or not b:
        raise ValueError("node sets must be nonempty")
    if a & b:
        raise ValueError("node sets must be disjoint")
    return _interbonds(g, a, b) / (len(a) * len(b))


def log10_connectivity_from_counts(n_interbonds: float, n1: float, n2: float) -> float:
    if n1 <= 0 or n2 <= 0:
        raise ValueError("node counts must be positive")
    if n_interbonds < 0:
        raise ValueError("interbond count must be non-negative")
    if n_interbonds == 0:
        return -math.inf
    lg = math.log10(n_interbonds) - math.log10(n1) - math.log10(n2)
    if lg > 1e-12:
        raise ValueError("n_interbonds exceeds n1 * n2")
    return min(lg, 0.0)


def connectivity_from_counts(n_interbonds: float, n1: float, n2: float) -> float:
    """Connectivity from raw counts, evaluated in log space so that counts of
    order 1e80 neither overflow nor lose precision."""
    lg = log10_connectivity_from_counts(n_interbonds, n1, n2)
    return 0.0 if lg == -math.inf else 10.0 ** lg


@dataclass
class SpreadingReport:
    union_count: int
    part_counts: list[int]
    sum_of_parts: int

    @property
    def additive(self) -> bool:
        return self.union_count == self.sum_of_parts


def spreading_statistic(g: Graph, target: Iterable[int],
                        parts: Sequence[Iterable[int]]) -> SpreadingReport:
    """Interbonds from the union of ``parts`` to ``target`` against the sum
    of per-part counts. For disjoint parts the two agree exactly."""
    t = set(target)
    ps = [set(p) for p in parts]
    seen: set[int] = set()
    for p in ps:
        if p & seen or p & t:
            raise ValueError("parts must be pairwise disjoint and disjoint from target")
        seen |= p
    counts = [_interbonds(g, p, t) for p in ps]
    union = _interbonds(g, seen, t)
    report = SpreadingReport(union, counts, sum(counts))
    assert report.additive, "disjoint-set interbond counts must be additive"
    return report


def spreading_ensemble(n: int, p: float, target_size: int, n_parts: int, part_size: int,
                       seeds: Sequence[int]) -> dict:
    """Per-part interbond counts over a G(n, p) ensemble.

    Returns the pooled per-part counts, their mean and relative spread, and
    the binomial reference mean ``part_size * target_size * p``.
    """
    if target_size + n_parts * part_size > n:
        raise ValueError("target and parts do not fit in the graph")
    target = range(target_size)
    parts = [range(target_size + i * part_size, target_size + (i + 1) * part_size)
             for i in range(n_parts)]
    counts = []
    for s in seeds:
        rep = spreading_statistic(erdos_renyi(n, p, s), target, parts)
        counts.extend(rep.part_counts)
    arr = np.asarray(counts, dtype=float)
    mean = float(arr.mean())
    return {
        "counts": counts,
        "mean": mean,
        "relative_spread": float(arr.std(ddof=1) / mean) if mean > 0 else 0.0,
        "binomial_mean": part_size * target_size * p,
        "binomial_std": math.sqrt(part_size * target_size * p * (1 - p)),
    }


# -- structural dynamics -----------------------------------------------------

def _wrapped(d: np.ndarray | float):
    return (np.asarray(d) + np.pi) % (2 * np.pi) - np.pi


def rewire_step(g: Graph, phases: Sequence[float], threshold: float, toggle_prob: float,
                rng_seed: int) -> Graph:
    """Phase-driven toggling of translocal edges.

    Every translocal edge whose wrapped phase difference exceeds
    ``threshold`` is removed with probability ``toggle_prob``. Then each
    node, with probability ``toggle_prob``, proposes a translocal edge to a
    uniformly drawn partner; it is added if the pair is phase-close (below
    ``threshold``), not yet joined and not lattice-adjacent.
    """
    if not 0.0 < threshold <= np.pi:
        raise ValueError("threshold must lie in (0, pi]")
    theta = np.asarray(phases, dtype=float)
    if theta.shape != (g.node_count,):
        raise ValueError("phases must be indexed by the graph's nodes")
    rng = np.random.default_rng(rng_seed)
    edges = dict(g.edges)
    for (u, v), kind in sorted(g.edges.items()):
        if kind != TRANSLOCAL:
            continue
        if abs(_wrapped(theta[u] - theta[v])) > threshold and rng.random() < toggle_prob:
            del edges[(u, v)]
    n = g.node_count
    if n >= 2:
        for u in range(n):
            if not rng.random() < toggle_prob:
                continue
            v = int(rng.integers(n - 1))
            v = v + 1 if v >= u else v
            key = _key(u, v)
            if key in edges or abs(_wrapped(theta[u] - theta[v])) >= threshold:
                continue
            if g.positions is not None and g.lattice_distance(u, v) == 1:
                continue
            edges[key] = TRANSLOCAL
    return g.with_edges(edges)

