
import pytest
from hypothesis import given, strategies as st

from _oracles import projection_oracle
from ppnet.graph import (
    WeightedGraph,
    build_bipartite,
    connected_components,
    degree_sequence,
    drop_singletons,
    edge_count_sum_rule,
    largest_connected_component,
    prescriber_attrs,
    project,
)
from ppnet.ingest import ClaimRecord


def claims(*pairs):
    return [ClaimRecord(pre, pat, schedule="II") for pat, pre in pairs]


def graph(*edges, nodes=()):
    return WeightedGraph(nodes, [(u, v, 1) for u, v in edges])


class TestBipartite:
    def test_dedup(self):
        b = build_bipartite(claims(("P1", "A"), ("P1", "A"), ("P2", "A")))
        assert len(b.patient_nodes) + len(b.prescriber_nodes) == 3
        assert len(b.edges) == 2

    def test_empty(self):
        b = build_bipartite([])
        assert not b.patient_nodes and not b.prescriber_nodes and not b.edges

    def test_five_claims(self):
        b = build_bipartite(claims(("P1", "A"), ("P1", "B"), ("P2", "A"), ("P3", "B"), ("P3", "B")))
        assert len(b.patient_nodes | b.prescriber_nodes) == 5
        assert b.edges == {("P1", "A"), ("P1", "B"), ("P2", "A"), ("P3", "B")}


class TestProject:
    def test_minimal_shared_patient(self):
        g = project(build_bipartite(claims(("p", "A"), ("p", "B"))))
        assert g.edges() == [("A", "B", 1)]

    def test_singleton(self):
        g = project(build_bipartite(claims(("p", "A"))))
        assert g.nodes() == ["A"] and g.number_of_edges() == 0

    def test_three_patients(self):
        b = build_bipartite(
            claims(("p1", "A"), ("p1", "B"), ("p2", "A"), ("p2", "B"), ("p2", "C"), ("p3", "B"), ("p3", "C"))
        )
        assert project(b).edges() == [("A", "B", 2), ("A", "C", 1), ("B", "C", 2)]
        assert degree_sequence(project(b)) == [2, 2, 2]

    def test_patient_side(self):
        b = build_bipartite(claims(("p1", "A"), ("p2", "A"), ("p2", "B"), ("p3", "B")))
        assert project(b, "patient").edges() == [("p1", "p2", 1), ("p2", "p3", 1)]

    def test_bad_side(self):
        with pytest.raises(ValueError):
            project(build_bipartite([]), "drug")

    def test_attrs_carried(self):
        recs = [
            ClaimRecord("A", "p", schedule="II", specialty="Dentist", latitude=38.0, longitude=-84.0),
            ClaimRecord("B", "p", schedule="II"),
        ]
        g = project(build_bipartite(recs), attrs=prescriber_attrs(recs))
        assert g.attr("A").specialty == "Dentist" and g.attr("A").has_geo
        assert not g.attr("B").has_geo


bip_st = st.lists(
    st.tuples(st.integers(0, 49).map(lambda i: f"p{i}"), st.integers(0, 19).map(lambda i: f"D{i:02d}")),
    max_size=120,
)


@given(bip_st)
def test_projection_matches_intersection_oracle(pairs):
    b = build_bipartite(claims(*pairs))
    g = project(b)
    assert {(u, v): w for u, v, w in g.edges()} == projection_oracle(pairs)
    assert set(g.nodes()) == {pre for _, pre in pairs}
    assert sum(w for *_, w in g.edges()) == edge_count_sum_rule(b)


@given(bip_st)
def test_drop_singletons_degrees(pairs):
    g = project(build_bipartite(claims(*pairs)))
    assert sorted(degree_sequence(drop_singletons(g))) == sorted(d for d in degree_sequence(g) if d)


@given(bip_st)
def test_components_partition(pairs):
    g = project(build_bipartite(claims(*pairs)))
    comps = connected_components(g)
    flat = [n for c in comps for n in c]
    assert len(flat) == len(set(flat)) == g.number_of_nodes()
    for u, v, _ in g.edges():
        assert any(u in c and v in c for c in comps)


class TestComponents:
    def test_triangle_plus_isolated(self):
        g = graph(("a", "b"), ("b", "c"), ("a", "c"), nodes=["z"])
        assert sorted(len(c) for c in connected_components(g)) == [1, 3]

    def test_empty(self):
        assert connected_components(WeightedGraph()) == []

    def test_two_edges(self):
        assert [len(c) for c in connected_components(graph(("a", "b"), ("c", "d")))] == [2, 2]

    def test_lcc(self):
        g = WeightedGraph(edges=[("a", "b", 2), ("b", "c", 3), ("x", "y", 1)])
        lcc = largest_connected_component(g)
        assert lcc.edges() == [("a", "b", 2), ("b", "c", 3)]

    def test_lcc_identity(self):
        g = graph(("a", "b"), ("b", "c"))
        assert largest_connected_component(g) == g

    def test_lcc_tie_break(self):
        g = graph(("m", "n"), ("b", "z"))
        assert largest_connected_component(g).nodes() == ["b", "z"]

    def test_lcc_empty(self):
        with pytest.raises(ValueError):
            largest_connected_component(WeightedGraph())


class TestDegrees:
    def test_triangle(self):
        assert degree_sequence(graph(("a", "b"), ("b", "c"), ("a", "c"))) == [2, 2, 2]

    def test_star(self):
        assert degree_sequence(graph(("h", "x"), ("h", "y"), ("h", "z"))) == [3, 1, 1, 1]

    def test_drop_singletons(self):
        tri = graph(("a", "b"), ("b", "c"), ("a", "c"))
        assert drop_singletons(graph(("a", "b"), ("b", "c"), ("a", "c"), nodes=["x", "y"])) == tri
        assert drop_singletons(WeightedGraph(["x", "y"])).number_of_nodes() == 0
        assert drop_singletons(tri) == tri


def test_simple_graph_invariants():
    with pytest.raises(ValueError):
        WeightedGraph(edges=[("a", "a", 1)])
    with pytest.raises(ValueError):
        WeightedGraph(edges=[("a", "b", 1), ("b", "a", 1)])
    with pytest.raises(ValueError):
        WeightedGraph(edges=[("a", "b", 0)])


def test_with_degrees():
    g = graph(("a", "b"), ("a", "c")).with_degrees()
    assert g.attr("a").degree == 2 and g.attr("b").degree == 1
