from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agids.errors import DataError, InvalidFraction, LimitExceeded, UnknownNode
from agids.graph import (
    AttackGraph,
    Edge,
    EdgeProvenance,
    combine,
    enumerate_paths,
    generate_classical,
    generate_from_alerts,
    inject_noise,
    load_graph,
    path_risk,
    save_graph,
    subset,
    victim_risk,
)
from agids.threat import Alert
from oracles import brute_force_paths, closure, dag_path_count
from test_threat import tiny_inventory

S = EdgeProvenance.SCRAPED


def graph_from(n, triples, weight=0.5):
    nodes = tuple(f"n{i}" for i in range(n))
    edges = tuple(Edge(f"n{s}", f"n{d}", v, weight, S) for s, d, v in triples)
    return AttackGraph(nodes, edges)


@st.composite
def random_graph(draw, max_nodes=6, max_edges=10, dag=False):
    n = draw(st.integers(2, max_nodes))
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d and (not dag or s < d)]
    chosen = draw(st.lists(st.tuples(st.sampled_from(pairs), st.sampled_from(["a", "b"])), max_size=max_edges, unique=True))
    return n, [(s, d, v) for (s, d), v in chosen]


def test_graph_validation():
    with pytest.raises(DataError):
        graph_from(2, [(0, 1, "a"), (0, 1, "a")])
    with pytest.raises(DataError):
        AttackGraph(("a",), (Edge("a", "b", "v", 0.5, S),))
    with pytest.raises(DataError):
        AttackGraph(("a", "b"), (Edge("a", "b", "v", 1.5, S),))


def test_classical_graph_matches_inventory():
    inv = tiny_inventory()
    ag = generate_classical(inv)
    assert [e.key for e in ag.edges] == [("1.2.3.4", "10.0.0.1", "V1"), ("10.0.0.1", "10.0.0.2", "V2"), ("10.0.0.1", "10.0.0.2", "V3")]
    assert [e.weight for e in ag.edges] == pytest.approx([0.75, 0.98, 0.4])
    assert ag.variant_tag == "Scrape"


def test_alert_graph_is_filtered_subgraph():
    inv = tiny_inventory()
    alerts = [
        Alert(1, "V1", "1.2.3.4", "10.0.0.1", "f1"),
        Alert(2, "V1", "1.2.3.4", "10.0.0.1", "f2"),  # duplicate triple
        Alert(3, "V2", "1.2.3.4", "10.0.0.2", "f3"),  # pair not reachable
        Alert(4, "V1", "10.0.0.1", "10.0.0.2", "f4"),  # vuln not on dst
    ]
    ag = generate_from_alerts(inv, alerts)
    assert [e.key for e in ag.edges] == [("1.2.3.4", "10.0.0.1", "V1")]
    assert ag.edges[0].provenance is EdgeProvenance.ALERT_DERIVED
    assert {e.key for e in ag.edges} <= {e.key for e in generate_classical(inv).edges}
    assert generate_from_alerts(inv, []).edges == ()


def test_paths_on_tiny_inventory():
    inv = tiny_inventory()
    paths = enumerate_paths(generate_classical(inv), inv.external_hosts, inv.internal_hosts, 4)
    # direct hit on .1, then two parallel edges onward to .2
    assert [p.nodes for p in paths] == [("1.2.3.4", "10.0.0.1"), ("1.2.3.4", "10.0.0.1", "10.0.0.2"), ("1.2.3.4", "10.0.0.1", "10.0.0.2")]
    assert [p.risk for p in paths] == pytest.approx([0.75, 0.75 * 0.98, 0.75 * 0.4], rel=1e-12)
    assert victim_risk(generate_classical(inv), "10.0.0.2", inv.external_hosts) == pytest.approx((0.3 + 0.735) / 2)
    assert victim_risk(generate_from_alerts(inv, []), "10.0.0.2", inv.external_hosts) == 0.0


def test_path_errors():
    ag = graph_from(3, [(0, 1, "a"), (1, 2, "a"), (0, 2, "a")])
    with pytest.raises(UnknownNode):
        enumerate_paths(ag, ["zz"], ["n2"])
    with pytest.raises(LimitExceeded):
        enumerate_paths(ag, ["n0"], ["n1", "n2"], 4, max_paths=2)
    assert len(enumerate_paths(ag, ["n0"], ["n1", "n2"], 4, max_paths=3)) == 3
    with pytest.raises(ValueError):
        path_risk([])


@given(random_graph(max_nodes=5, max_edges=7), st.integers(1, 4))
@settings(max_examples=80, deadline=None)
def test_paths_equal_brute_force(g, l_max):
    n, triples = g
    ag = graph_from(n, triples)
    sources, targets = {"n0"}, {f"n{i}" for i in range(1, n)}
    got = enumerate_paths(ag, sources, targets, l_max)
    oracle_edges = [(f"n{s}", f"n{d}", v) for s, d, v in triples]
    expected = brute_force_paths(oracle_edges, sources, targets, l_max)
    assert {tuple(e.key for e in p.edges) for p in got} == expected
    assert len(got) == len(expected)
    for p in got:
        assert p.risk == pytest.approx(0.5 ** len(p), rel=1e-12)
        assert len(set(p.nodes)) == len(p.nodes)


@given(random_graph(max_nodes=6, max_edges=12, dag=True), st.integers(1, 5))
@settings(max_examples=80, deadline=None)
def test_dag_path_count_matches_matrix_powers(g, l_max):
    n, triples = g
    ag = graph_from(n, triples)
    got = enumerate_paths(ag, ["n0"], [f"n{i}" for i in range(n)], l_max)
    assert len(got) == dag_path_count(n, [(s, d) for s, d, _ in triples], [0], range(n), l_max)


@given(random_graph(max_nodes=7, max_edges=14))
@settings(max_examples=80, deadline=None)
def test_has_attack_path_equals_closure(g):
    n, triples = g
    ag = graph_from(n, triples)
    reach = closure(n, [(s, d) for s, d, _ in triples])
    for s in range(n):
        for d in range(n):
            assert ag.has_attack_path(f"n{s}", f"n{d}") == bool(reach[s, d])
    assert not ag.has_attack_path("n0", "unknown")


def test_self_reachability_needs_a_cycle():
    assert not graph_from(2, [(0, 1, "a")]).has_attack_path("n0", "n0")
    assert graph_from(2, [(0, 1, "a"), (1, 0, "a")]).has_attack_path("n0", "n0")


def test_noise():
    ag = graph_from(4, [(0, 1, "a")])
    assert inject_noise(ag, 0.0, 1) == ag
    full = inject_noise(ag, 1.0, 1)
    assert full.count(EdgeProvenance.SYNTHETIC) == 4 * 3 - 1
    assert all(e.weight == 0.5 for e in full.edges if e.provenance is EdgeProvenance.SYNTHETIC)
    assert inject_noise(ag, 0.3, 5) == inject_noise(ag, 0.3, 5)
    with pytest.raises(InvalidFraction):
        inject_noise(ag, 1.2, 0)


@given(st.floats(0, 1), st.integers(0, 100))
@settings(max_examples=40, deadline=None)
def test_noise_rate_and_superset(p, seed):
    ag = graph_from(8, [(0, 1, "a"), (2, 3, "b")])
    noisy = inject_noise(ag, p, seed)
    assert {e.key for e in ag.edges} <= {e.key for e in noisy.edges}


def test_noise_rate_is_close_to_p():
    ag = graph_from(40, [])
    rate = inject_noise(ag, 0.2, 3).count(EdgeProvenance.SYNTHETIC) / (40 * 39)
    assert abs(rate - 0.2) < 0.03


def test_combine_and_subset():
    a = AttackGraph(("x", "y"), (Edge("x", "y", "v", 0.9, EdgeProvenance.ALERT_DERIVED),), "ET")
    b = AttackGraph(("x", "y", "z"), (Edge("x", "y", "v", 0.2, S), Edge("y", "z", "w", 0.3, S)), "Scrape")
    c = combine(a, b, "Scrape+ET")
    assert c.nodes == ("x", "y", "z")
    assert [e.weight for e in c.edges] == [0.9, 0.3]
    assert c.variant_tag == "Scrape+ET"
    s = subset(b, 0.5, 0)
    assert len(s.edges) == 1 and s.variant_tag == "Sub(Scrape)"
    assert subset(b, 1.0, 0).edges == b.edges
    assert subset(b, 0.5, 4) == subset(b, 0.5, 4)
    with pytest.raises(InvalidFraction):
        subset(b, 0.0, 0)


def test_graph_io(tmp_path):
    ag = generate_classical(tiny_inventory())
    save_graph(ag, tmp_path / "g.json")
    assert load_graph(tmp_path / "g.json") == ag
    dot = ag.to_dot()
    assert dot.startswith('digraph "Scrape"') and dot.count("->") == len(ag.edges)


def test_path_risk_product():
    es = [Edge("a", "b", "v", w, S) for w in (0.5, 0.25, 0.8)]
    assert path_risk(es) == pytest.approx(math.prod([0.5, 0.25, 0.8]))
    assert np.isclose(path_risk(es[:1]), 0.5)
