"""Bipartite patient-prescriber graphs and their weighted projections."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Mapping

from ppnet.ingest import ClaimRecord


@dataclass(frozen=True)
class NodeAttr:
    specialty: str = ""
    latitude: float | None = None
    longitude: float | None = None
    degree: int | None = None

    @property
    def has_geo(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(frozen=True)
class BipartiteGraph:
    patient_nodes: frozenset[str]
    prescriber_nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]  # (patient, prescriber)

    def neighbors_of_prescriber(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {p: set() for p in self.prescriber_nodes}
        for pat, pre in self.edges:
            out[pre].add(pat)
        return out

    def neighbors_of_patient(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {p: set() for p in self.patient_nodes}
        for pat, pre in self.edges:
            out[pat].add(pre)
        return out


class WeightedGraph:
    """Undirected simple graph with positive integer edge weights.

    Treated as immutable once built; all transformations return new graphs.
    Node ids are strings and edges are reported as ``(u, v)`` with ``u < v``.
    """

    __slots__ = ("_attrs", "_adj")

    def __init__(
        self,
        nodes: Iterable[str] = (),
        edges: Iterable[tuple[str, str, int]] = (),
        attrs: Mapping[str, NodeAttr] | None = None,
    ):
        attrs = attrs or {}
        self._adj: dict[str, dict[str, int]] = {}
        self._attrs: dict[str, NodeAttr] = {}
        for n in nodes:
            self._add_node(n, attrs.get(n))
        for u, v, w in edges:
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if w < 1:
                raise ValueError(f"edge ({u!r}, {v!r}) has non-positive weight {w}")
            self._add_node(u, attrs.get(u))
            self._add_node(v, attrs.get(v))
            if v in self._adj[u]:
                raise ValueError(f"parallel edge ({u!r}, {v!r})")
            self._adj[u][v] = w
            self._adj[v][u] = w

    def _add_node(self, n: str, attr: NodeAttr | None) -> None:
        if n not in self._adj:
            self._adj[n] = {}
            self._attrs[n] = attr if attr is not None else NodeAttr()

    # -- queries ---------------------------------------------------------

    def nodes(self) -> list[str]:
        return sorted(self._adj)

    def __contains__(self, node: str) -> bool:
        return node in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def number_of_nodes(self) -> int:
        return len(self._adj)

    def number_of_edges(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def edges(self) -> list[tuple[str, str, int]]:
        """All edges as ``(u, v, weight)`` with ``u < v``, sorted."""
        return sorted((u, v, w) for u, nb in self._adj.items() for v, w in nb.items() if u < v)

    def neighbors(self, node: str) -> Mapping[str, int]:
        return self._adj[node]

    def degree(self, node: str) -> int:
        return len(self._adj[node])

    def weight(self, u: str, v: str) -> int:
        return self._adj[u][v]

    def has_edge(self, u: str, v: str) -> bool:
        return v in self._adj.get(u, ())

    def attr(self, node: str) -> NodeAttr:
        return self._attrs[node]

    def attrs(self) -> dict[str, NodeAttr]:
        return dict(self._attrs)

    def with_degrees(self) -> WeightedGraph:
        """Copy whose node attributes carry the current degree."""
        attrs = {n: replace(a, degree=len(self._adj[n])) for n, a in self._attrs.items()}
        return WeightedGraph(self._adj, self.edges(), attrs)

    def subgraph(self, nodes: Iterable[str]) -> WeightedGraph:
        keep = set(nodes)
        edges = [(u, v, w) for u, v, w in self.edges() if u in keep and v in keep]
        return WeightedGraph(sorted(keep), edges, {n: self._attrs[n] for n in keep})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self._adj == other._adj and self._attrs == other._attrs

    def __repr__(self) -> str:
        return f"WeightedGraph(nodes={self.number_of_nodes()}, edges={self.number_of_edges()})"


def build_bipartite(records: Iterable[ClaimRecord]) -> BipartiteGraph:
    """Collapse claims to distinct (patient, prescriber) pairs."""
    patients: set[str] = set()
    prescribers: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for rec in records:
        patients.add(rec.patient_id)
        prescribers.add(rec.prescriber_id)
        edges.add((rec.patient_id, rec.prescriber_id))
    return BipartiteGraph(frozenset(patients), frozenset(prescribers), frozenset(edges))


def project(
    bipartite: BipartiteGraph,
    side: str = "prescriber",
    attrs: Mapping[str, NodeAttr] | None = None,
) -> WeightedGraph:
    """One-mode projection onto ``side`` ("prescriber" or "patient").

    Two nodes are joined when they share at least one counterpart; the edge
    weight is the number of distinct shared counterparts. Nodes without any
    shared counterpart stay in the graph as singletons.
    """
    if side == "prescriber":
        nodes = bipartite.prescriber_nodes
        groups = bipartite.neighbors_of_patient()
    elif side == "patient":
        nodes = bipartite.patient_nodes
        groups = bipartite.neighbors_of_prescriber()
    else:
        raise ValueError(f"side must be 'prescriber' or 'patient', got {side!r}")

    weights: dict[tuple[str, str], int] = defaultdict(int)
    for members in groups.values():
        for u, v in combinations(sorted(members), 2):
            weights[(u, v)] += 1
    return WeightedGraph(sorted(nodes), ((u, v, w) for (u, v), w in weights.items()), attrs)


def prescriber_attrs(records: Iterable[ClaimRecord]) -> dict[str, NodeAttr]:
    """Specialty and coordinates per prescriber.

    The first non-empty specialty and the first complete coordinate pair seen
    in record order are used.
    """
    specialty: dict[str, str] = {}
    geo: dict[str, tuple[float, float]] = {}
    seen: set[str] = set()
    for rec in records:
        pid = rec.prescriber_id
        seen.add(pid)
        if rec.specialty and pid not in specialty:
            specialty[pid] = rec.specialty
        if rec.has_geo and pid not in geo:
            geo[pid] = (rec.latitude, rec.longitude)
    out = {}
    for pid in seen:
        lat, lon = geo.get(pid, (None, None))
        out[pid] = NodeAttr(specialty=specialty.get(pid, ""), latitude=lat, longitude=lon)
    return out


def degree_sequence(graph: WeightedGraph) -> list[int]:
    """Unweighted degrees in node-id order."""
    return [graph.degree(n) for n in graph.nodes()]


def connected_components(graph: WeightedGraph) -> list[set[str]]:
    """Components ordered by decreasing size, then by smallest member id."""
    seen: set[str] = set()
    comps: list[set[str]] = []
    for start in graph.nodes():
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in graph.neighbors(u):
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def largest_connected_component(graph: WeightedGraph) -> WeightedGraph:
    """Induced subgraph on the largest component.

    Among equally large components the one holding the smallest node id wins.
    """
    comps = connected_components(graph)
    if not comps:
        raise ValueError("largest connected component of an empty graph is undefined")
    return graph.subgraph(comps[0])


def drop_singletons(graph: WeightedGraph) -> WeightedGraph:
    return graph.subgraph(n for n in graph.nodes() if graph.degree(n) > 0)


def is_connected(graph: WeightedGraph) -> bool:
    return len(connected_components(graph)) == 1


def edge_count_sum_rule(bipartite: BipartiteGraph) -> int:
    """Sum of C(k, 2) over patients, k = number of distinct prescribers seen.

    Equals the total PPN edge weight.
    """
    return sum(len(p) * (len(p) - 1) // 2 for p in bipartite.neighbors_of_patient().values())
