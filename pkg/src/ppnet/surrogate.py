"""Degree-preserving surrogate graphs and the parametric surrogate test.

Surrogates come from a Markov chain of double edge swaps started at the
observed graph. Swaps that would create a self-loop or a parallel edge are
rejected; swaps that disconnect the graph are undone.

The swap loop runs under numba on a fixed-width adjacency table: degrees
never change, so each node keeps a row of exactly ``deg`` neighbour slots.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from ppnet.graph import WeightedGraph, is_connected
from ppnet.linkcomm import link_communities

DEFAULT_N_SURROGATES = 99
DEFAULT_SWAP_FACTOR = 10
DEFAULT_THRESHOLD = 2.0


@numba.njit(cache=True, nogil=True)
def _has_edge(adj, deg, u, v):
    # scan the shorter row
    if deg[u] > deg[v]:
        u, v = v, u
    for k in range(deg[u]):
        if adj[u, k] == v:
            return True
    return False


@numba.njit(cache=True, nogil=True)
def _replace(adj, deg, u, old, new):
    for k in range(deg[u]):
        if adj[u, k] == old:
            adj[u, k] = new
            return


@numba.njit(cache=True, nogil=True)
def _connected_after(adj, deg, a, b, mark, stamp, qa, qb):
    """True if ``a`` still reaches ``b``.

    Two breadth-first searches grow in turn from ``a`` and ``b``; the first
    to run dry proves a split, a meeting proves connectivity. The cost is
    bounded by twice the smaller side when the swap disconnects.
    """
    ta = 2 * stamp
    tb = 2 * stamp + 1
    mark[a] = ta
    mark[b] = tb
    qa[0] = a
    qb[0] = b
    ha, na, hb, nb = 0, 1, 0, 1
    while ha < na and hb < nb:
        u = qa[ha]
        ha += 1
        for k in range(deg[u]):
            w = adj[u, k]
            if mark[w] == tb:
                return True
            if mark[w] != ta:
                mark[w] = ta
                qa[na] = w
                na += 1
        u = qb[hb]
        hb += 1
        for k in range(deg[u]):
            w = adj[u, k]
            if mark[w] == ta:
                return True
            if mark[w] != tb:
                mark[w] = tb
                qb[nb] = w
                nb += 1
    return False


@numba.njit(cache=True, nogil=True)
def _swap_chain(edges, adj, deg, first, second, flip, mark, stamp0):
    """Attempt one double edge swap per entry of ``first``; mutates in place.

    Returns ``(accepted, next_stamp)``.
    """
    n = deg.shape[0]
    qa = np.empty(n, dtype=np.int64)
    qb = np.empty(n, dtype=np.int64)
    stamp = stamp0
    accepted = 0
    for t in range(first.shape[0]):
        i = first[t]
        j = second[t]
        if i == j:
            continue
        a = edges[i, 0]
        b = edges[i, 1]
        if flip[t]:
            c = edges[j, 1]
            d = edges[j, 0]
        else:
            c = edges[j, 0]
            d = edges[j, 1]
        # (a,b),(c,d) -> (a,c),(b,d)
        if a == c or b == d:
            continue
        if _has_edge(adj, deg, a, c) or _has_edge(adj, deg, b, d):
            continue
        _replace(adj, deg, a, b, c)
        _replace(adj, deg, b, a, d)
        _replace(adj, deg, c, d, a)
        _replace(adj, deg, d, c, b)
        stamp += 1
        if _connected_after(adj, deg, a, b, mark, stamp, qa, qb):
            edges[i, 0] = a
            edges[i, 1] = c
            edges[j, 0] = b
            edges[j, 1] = d
            accepted += 1
        else:
            _replace(adj, deg, a, c, b)
            _replace(adj, deg, b, d, a)
            _replace(adj, deg, c, a, d)
            _replace(adj, deg, d, b, c)
    return accepted, stamp


class SwapState:
    """Index-based mutable copy of a graph for the swap kernel."""

    def __init__(self, graph: WeightedGraph):
        self.labels = graph.nodes()
        pos = {n: i for i, n in enumerate(self.labels)}
        self.edges = np.array([(pos[u], pos[v]) for u, v, _ in graph.edges()], dtype=np.int64).reshape(-1, 2)
        self.deg = np.array([graph.degree(n) for n in self.labels], dtype=np.int64)
        width = int(self.deg.max()) if len(self.deg) else 0
        self.adj = np.full((len(self.labels), max(width, 1)), -1, dtype=np.int64)
        for n in self.labels:
            row = sorted(pos[v] for v in graph.neighbors(n))
            self.adj[pos[n], : len(row)] = row
        self.mark = np.zeros(len(self.labels), dtype=np.int64)
        self.stamp = 0

    def run(self, first: np.ndarray, second: np.ndarray, flip: np.ndarray) -> int:
        accepted, self.stamp = _swap_chain(
            self.edges, self.adj, self.deg, first, second, flip, self.mark, self.stamp
        )
        return accepted

    def to_graph(self, reference: WeightedGraph) -> WeightedGraph:
        lab = self.labels
        edges = sorted(
            (lab[u], lab[v], 1) if lab[u] < lab[v] else (lab[v], lab[u], 1) for u, v in self.edges.tolist()
        )
        return WeightedGraph(lab, edges, reference.attrs())


def sample_surrogate(
    graph: WeightedGraph, rng: np.random.Generator, swap_factor: float = DEFAULT_SWAP_FACTOR
) -> WeightedGraph:
    """Random simple connected graph with the same degree of every node.

    ``swap_factor * |E|`` swaps are attempted. Output edges have weight 1.
    """
    if graph.number_of_nodes() < 2 or not is_connected(graph):
        raise ValueError("surrogate sampling needs a connected graph with at least two nodes")
    m = graph.number_of_edges()
    if m < 2:
        return WeightedGraph(graph.nodes(), [(u, v, 1) for u, v, _ in graph.edges()], graph.attrs())
    state = SwapState(graph)
    attempts = int(math.ceil(swap_factor * m))
    first = rng.integers(0, m, size=attempts, dtype=np.int64)
    second = rng.integers(0, m, size=attempts, dtype=np.int64)
    flip = rng.integers(0, 2, size=attempts, dtype=np.int64).astype(np.bool_)
    state.run(first, second, flip)
    return state.to_graph(graph)


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for realisation ``index``, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass(frozen=True)
class SurrogateResult:
    m_orig: float
    values: tuple[float, ...]
    mu_surr: float
    sigma_surr: float
    s_score: float
    rejected: bool
    n_s: int
    seed: int
    swap_factor: float = DEFAULT_SWAP_FACTOR
    threshold: float = DEFAULT_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "m_orig": self.m_orig,
            "mu_surr": self.mu_surr,
            "sigma_surr": self.sigma_surr,
            "S": "inf" if math.isinf(self.s_score) else self.s_score,
            "rejected": self.rejected,
            "n_s": self.n_s,
            "seed": self.seed,
            "swap_factor": self.swap_factor,
            "threshold": self.threshold,
            "sigma_convention": "population (1/n_s)",
            "surrogate_values": list(self.values),
        }


def s_score(m_orig: float, values, threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float, float, bool]:
    """``(mu, sigma, S, rejected)`` for an observed value against surrogate values.

    With zero spread S is 0 when the observation equals the mean and
    infinite otherwise.
    """
    vals = [float(v) for v in values]
    mu = statistics.fmean(vals)
    sigma = statistics.pstdev(vals)
    if sigma == 0:
        if len(set(vals)) == 1:
            mu = vals[0]
        s = 0.0 if m_orig == mu else math.inf
    else:
        s = abs(m_orig - mu) / sigma
    return mu, sigma, s, s > threshold


def _one(args) -> float:
    graph, statistic, seed, index, swap_factor = args
    return float(statistic(sample_surrogate(graph, substream(seed, index), swap_factor)))


def max_partition_density_statistic(graph: WeightedGraph) -> float:
    return link_communities(graph)[2]


def surrogate_test(
    graph: WeightedGraph,
    statistic: Callable[[WeightedGraph], float] = max_partition_density_statistic,
    n_s: int = DEFAULT_N_SURROGATES,
    seed: int = 0,
    swap_factor: float = DEFAULT_SWAP_FACTOR,
    threshold: float = DEFAULT_THRESHOLD,
    workers: int = 1,
) -> SurrogateResult:
    """Compare ``statistic(graph)`` with its values on ``n_s`` surrogates.

    Realisation ``i`` draws from a stream derived from ``(seed, i)`` only, so
    the result does not depend on ``workers``. With ``workers > 1`` the
    statistic must be picklable.
    """
    if n_s < 2:
        raise ValueError("need at least two surrogates")
    m_orig = float(statistic(graph))
    jobs = [(graph, statistic, seed, i, swap_factor) for i in range(n_s)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_one, jobs))
    else:
        values = [_one(job) for job in jobs]
    mu, sigma, s, rejected = s_score(m_orig, values, threshold)
    return SurrogateResult(
        m_orig=m_orig,
        values=tuple(values),
        mu_surr=mu,
        sigma_surr=sigma,
        s_score=s,
        rejected=rejected,
        n_s=n_s,
        seed=seed,
        swap_factor=swap_factor,
        threshold=threshold,
    )
