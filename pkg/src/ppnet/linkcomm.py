"""Overlapping communities by hierarchical clustering of links.

Edges are compared through the Jaccard index of the inclusive neighbourhoods
of their non-shared endpoints, grouped by average linkage, and the dendrogram
is cut where partition density peaks.

Only adjacent edge pairs ever get a similarity; any other pair counts as 0
in the linkage average. Partition density is accumulated with exact
rationals so that cut levels compare without rounding noise.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from ppnet.graph import WeightedGraph, is_connected

Edge = tuple[str, str]

# linkage values are rounded before ordering so float noise cannot split ties
_LINKAGE_DIGITS = 12


def _edge(u: str, v: str) -> Edge:
    return (u, v) if u < v else (v, u)


def _inclusive(graph: WeightedGraph, node: str) -> set[str]:
    nb = set(graph.neighbors(node))
    nb.add(node)
    return nb


def edge_similarity(graph: WeightedGraph, e1: Edge, e2: Edge) -> float:
    """Jaccard similarity of two edges that share exactly one endpoint."""
    a, b = set(e1), set(e2)
    if len(a) != 2 or len(b) != 2 or not graph.has_edge(*e1) or not graph.has_edge(*e2):
        raise ValueError("both arguments must be edges of the graph")
    shared = a & b
    if len(shared) != 1:
        raise ValueError(f"edges {e1} and {e2} are not adjacent (or identical)")
    (i,) = a - shared
    (j,) = b - shared
    ni, nj = _inclusive(graph, i), _inclusive(graph, j)
    inter = len(ni & nj)
    return inter / (len(ni) + len(nj) - inter)


def adjacent_edge_pairs(graph: WeightedGraph) -> Iterator[tuple[Edge, Edge, str]]:
    """Yield ``(e1, e2, keystone)`` once for every pair of edges sharing a node."""
    for k in graph.nodes():
        incident = sorted(_edge(k, v) for v in graph.neighbors(k))
        for x in range(len(incident)):
            for y in range(x + 1, len(incident)):
                yield incident[x], incident[y], k


def _similarity_table(graph: WeightedGraph, index: dict[Edge, int]) -> dict[tuple[int, int], float]:
    nplus = {n: _inclusive(graph, n) for n in graph.nodes()}
    sims: dict[tuple[int, int], float] = {}
    for k in graph.nodes():
        nbrs = sorted(graph.neighbors(k))
        ids = [index[_edge(k, v)] for v in nbrs]
        for x in range(len(nbrs)):
            ni = nplus[nbrs[x]]
            for y in range(x + 1, len(nbrs)):
                nj = nplus[nbrs[y]]
                inter = len(ni & nj)
                s = inter / (len(ni) + len(nj) - inter)
                a, b = ids[x], ids[y]
                sims[(a, b) if a < b else (b, a)] = s
    return sims


@dataclass(frozen=True)
class Merge:
    step: int
    left: int
    right: int
    similarity: float


@dataclass(frozen=True)
class Dendrogram:
    """Merge history over edges.

    Leaves ``0..M-1`` are the edges in sorted order; the cluster created at
    step ``s`` (0-based) gets id ``M + s``.
    """

    edges: tuple[Edge, ...]
    merges: tuple[Merge, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.edges)

    def levels(self) -> list[int]:
        """Numbers of merges applied at each distinct cut level.

        Always starts with 0 (every edge alone) and ends with the full merge
        count. Consecutive merges at the same similarity form one level.
        """
        out = [0]
        for i, m in enumerate(self.merges):
            last = i + 1 == len(self.merges)
            if last or self.merges[i + 1].similarity != m.similarity:
                out.append(i + 1)
        return out


def cluster_links(graph: WeightedGraph) -> Dendrogram:
    """Average-linkage agglomeration of the edges of a connected graph.

    Among equally similar candidate pairs, the pair whose smallest member
    edges sort first is merged first.
    """
    edges = tuple((u, v) for u, v, _ in graph.edges())
    if not edges:
        raise ValueError("cannot cluster the links of an edgeless graph")
    if not is_connected(graph):
        raise ValueError("link clustering requires a connected graph")
    index = {e: i for i, e in enumerate(edges)}
    m = len(edges)

    size = [1] * m
    first = list(range(m))  # smallest leaf id in each cluster
    alive = [True] * m
    links: list[dict[int, float]] = [defaultdict(float) for _ in range(m)]
    for (a, b), s in _similarity_table(graph, index).items():
        links[a][b] += s
        links[b][a] += s

    heap: list[tuple[float, int, int, int, int]] = []

    def push(a: int, b: int, total: float) -> None:
        key = round(total / (size[a] * size[b]), _LINKAGE_DIGITS)
        fa, fb = first[a], first[b]
        lo, hi = (fa, fb) if fa < fb else (fb, fa)
        heapq.heappush(heap, (-key, lo, hi, a, b))

    for a in range(m):
        for b, total in links[a].items():
            if a < b:
                push(a, b, total)

    merges: list[Merge] = []
    while heap and len(merges) < m - 1:
        neg, _, _, a, b = heapq.heappop(heap)
        if not (alive[a] and alive[b]):
            continue
        new = len(size)
        alive[a] = alive[b] = False
        la, lb = links[a], links[b]
        if len(la) < len(lb):
            la, lb = lb, la
        for c, total in lb.items():
            la[c] += total
        la.pop(a, None)
        la.pop(b, None)
        links[a] = links[b] = None  # type: ignore[call-overload]
        size.append(size[a] + size[b])
        first.append(min(first[a], first[b]))
        alive.append(True)
        links.append(la)
        for c, total in la.items():
            lc = links[c]
            lc.pop(a, None)
            lc.pop(b, None)
            lc[new] = total
            push(new, c, total)
        merges.append(Merge(len(merges), a, b, -neg))
    if len(merges) != m - 1:  # pragma: no cover - guarded by the connectivity check
        raise RuntimeError("link similarity structure is disconnected")
    return Dendrogram(edges, tuple(merges))


def _density_term(m: int, n: int) -> Fraction:
    if n <= 2:
        return Fraction(0)
    return Fraction(m * (m - n + 1), (n - 2) * (n - 1))


@dataclass(frozen=True)
class LinkPartition:
    """Edge communities ordered by their smallest edge."""

    communities: tuple[tuple[Edge, ...], ...]
    density_exact: Fraction

    @property
    def density(self) -> float:
        return float(self.density_exact)

    def edge_assignment(self) -> dict[Edge, int]:
        return {e: c for c, group in enumerate(self.communities) for e in group}

    def __len__(self) -> int:
        return len(self.communities)


def _exact_density(communities: Sequence[Sequence[Edge]], n_edges: int) -> Fraction:
    total = Fraction(0)
    for group in communities:
        nodes = {x for e in group for x in e}
        total += _density_term(len(group), len(nodes))
    return 2 * total / n_edges


def partition_density(graph: WeightedGraph, partition: LinkPartition | Iterable[Iterable[Edge]]) -> float:
    """Partition density of a link partition covering every edge of ``graph``."""
    groups = partition.communities if isinstance(partition, LinkPartition) else partition
    groups = [[_edge(*e) for e in g] for g in groups]
    if not groups or not any(groups):
        raise ValueError("partition is empty")
    flat = [e for g in groups for e in g]
    expected = {(u, v) for u, v, _ in graph.edges()}
    if len(flat) != len(set(flat)) or set(flat) != expected:
        raise ValueError("partition must assign every edge of the graph exactly once")
    return float(_exact_density(groups, len(flat)))


def _communities_at(dendrogram: Dendrogram, n_merges: int) -> tuple[tuple[Edge, ...], ...]:
    parent = list(range(dendrogram.n_leaves + n_merges))
    for mg in dendrogram.merges[:n_merges]:
        new = dendrogram.n_leaves + mg.step
        parent[mg.left] = new
        parent[mg.right] = new

    def root(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    groups: dict[int, list[Edge]] = defaultdict(list)
    for i, e in enumerate(dendrogram.edges):
        groups[root(i)].append(e)
    return tuple(sorted(tuple(g) for g in groups.values()))


def level_densities(dendrogram: Dendrogram) -> list[tuple[int, float, Fraction]]:
    """``(n_merges, similarity, D)`` at every distinct cut level.

    The all-leaves level is reported with similarity 1.0 (nothing merged yet).
    """
    m = dendrogram.n_leaves
    nodes: list[set[str] | None] = [set(e) for e in dendrogram.edges]
    count = [1] * m
    total = Fraction(0)  # every leaf has two nodes and contributes nothing
    after: list[Fraction] = [total]
    for mg in dendrogram.merges:
        na, nb = nodes[mg.left], nodes[mg.right]
        total -= _density_term(count[mg.left], len(na))
        total -= _density_term(count[mg.right], len(nb))
        if len(na) < len(nb):
            na, nb = nb, na
        na |= nb
        nodes[mg.left] = nodes[mg.right] = None
        nodes.append(na)
        count.append(count[mg.left] + count[mg.right])
        total += _density_term(count[-1], len(na))
        after.append(total)
    out = []
    for k in dendrogram.levels():
        sim = dendrogram.merges[k - 1].similarity if k else 1.0
        out.append((k, sim, 2 * after[k] / m))
    return out


def best_partition(graph: WeightedGraph, dendrogram: Dendrogram) -> tuple[float, LinkPartition, float]:
    """Cut the dendrogram at the level of maximum partition density.

    Returns ``(cut similarity, partition, D_max)``. Ties go to the coarser
    cut.
    """
    expected = tuple((u, v) for u, v, _ in graph.edges())
    if expected != dendrogram.edges:
        raise ValueError("dendrogram was not built from this graph")
    best = None
    for k, sim, dens in level_densities(dendrogram):
        if best is None or dens >= best[2]:
            best = (k, sim, dens)
    k, sim, dens = best
    part = LinkPartition(_communities_at(dendrogram, k), dens)
    return sim, part, float(dens)


def node_communities(partition: LinkPartition) -> dict[str, set[int]]:
    """Community ids of every node; a node sits in each community owning one of its edges."""
    out: dict[str, set[int]] = defaultdict(set)
    for c, group in enumerate(partition.communities):
        for u, v in group:
            out[u].add(c)
            out[v].add(c)
    return dict(out)


def link_communities(graph: WeightedGraph) -> tuple[float, LinkPartition, float]:
    """Cluster the links of ``graph`` and return the density-optimal cut."""
    return best_partition(graph, cluster_links(graph))
