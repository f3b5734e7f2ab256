"""Graph structure, d-separation and the graphical criteria."""

import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itv_audit.experiments import degrees_graph, hiring_graph, music_graph, random_sl_graph
from itv_audit.graph import (EdgeSubgraph, GraphError, NodeRole, SLGraph, active_paths, d_connected,
                             d_separated, directed_paths_via, format_path, itv_criterion,
                             padmissible_extra_condition, padmissible_itv_criterion, psie_criterion,
                             requisite_features, shortest_active_path, validate_sl_graph)


def moral_dsep(graph, x, y, z):
    """Independent oracle: separation in the moralised ancestral graph."""
    keep = graph.ancestors(set(x) | set(y) | set(z))
    und = nx.Graph()
    und.add_nodes_from(keep)
    for v in keep:
        ps = [p for p in graph.parents(v) if p in keep]
        und.add_edges_from((p, v) for p in ps)
        und.add_edges_from(itertools.combinations(ps, 2))
    und.remove_nodes_from(z)
    return not any(nx.has_path(und, a, b) for a in x for b in y)


def chain_graph():
    return SLGraph([("A", "sensitive"), ("B", "chance"), ("Y", "target"), ("Yhat", "prediction"), ("U", "utility")],
                   [("A", "B"), ("B", "Y"), ("B", "Yhat"), ("Y", "U"), ("Yhat", "U")])


# -- structure ---------------------------------------------------------------

def test_roles_and_features():
    g = hiring_graph()
    assert g.sensitive == "A" and g.target == "Y" and g.prediction == "Yhat" and g.utility == "U"
    assert g.features == ("D",)
    assert g.role("D") is NodeRole.CHANCE


def test_topological_order_tie_break_by_declaration():
    g = music_graph()
    assert tuple(g.topological_order()) == ("A", "M", "T", "Y", "Yhat", "U")


def test_validate_accepts_example_graphs():
    for g in (hiring_graph(), music_graph(), music_graph(True), degrees_graph(), degrees_graph(True)):
        assert validate_sl_graph(g).ok


def test_validate_rejects_extra_utility_parent():
    g = hiring_graph().with_edges(add=[("D", "U")])
    report = validate_sl_graph(g)
    assert not report.ok
    assert any("Utility parents" in v for v in report.violations)


def test_validate_rejects_prediction_child():
    g = SLGraph([("A", "sensitive"), ("Y", "target"), ("Yhat", "prediction"), ("U", "utility"), ("Z", "chance")],
                [("A", "Yhat"), ("Yhat", "Z"), ("Y", "U"), ("Yhat", "U")])
    assert any("Prediction child" in v for v in validate_sl_graph(g).violations)


def test_validate_rejects_cycle_and_missing_roles():
    g = SLGraph([("A", "chance"), ("B", "chance")], [("A", "B"), ("B", "A")])
    report = validate_sl_graph(g)
    assert not report.ok
    assert len(report.violations) >= 2


def test_unknown_node_in_edge():
    with pytest.raises(GraphError):
        SLGraph([("A", "chance")], [("A", "B")])


# -- d-separation ------------------------------------------------------------

def test_collider_blocks_until_conditioned():
    g = music_graph()
    assert d_separated(g, {"A"}, {"M"})
    assert d_connected(g, {"A"}, {"M"}, {"T"})
    assert d_connected(g, {"A"}, {"M"}, {"Yhat"})   # descendant of the collider


def test_chain_blocked_by_middle():
    g = chain_graph()
    assert d_connected(g, {"A"}, {"Y"})
    assert d_separated(g, {"A"}, {"Y"}, {"B"})


def test_overlapping_sets_rejected():
    with pytest.raises(GraphError):
        d_separated(hiring_graph(), {"A"}, {"A"})


def test_active_paths_and_shortest():
    g = music_graph()
    paths = list(active_paths(g, "T", "Y", {"Yhat"}, avoid={"U"}))
    assert ("T", "M", "Y") in paths
    assert shortest_active_path(g, "A", "T") == ("A", "T")
    assert format_path(g, ("T", "M", "Y")) == "T <- M -> Y"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_bayes_ball_matches_moralisation(seed):
    rng = np.random.default_rng(seed)
    g = random_sl_graph(7, 0.4, rng)
    nodes = list(g.nodes)
    x, y = rng.choice(nodes, 2, replace=False)
    rest = [n for n in nodes if n not in (x, y)]
    z = {n for n in rest if rng.random() < 0.3}
    assert d_separated(g, {x}, {y}, z) == moral_dsep(g, {x}, {y}, z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_d_separation_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    g = random_sl_graph(6, 0.5, rng)
    nodes = list(g.nodes)
    x, y = rng.choice(nodes, 2, replace=False)
    z = {n for n in nodes if n not in (x, y) and rng.random() < 0.4}
    assert d_separated(g, {x}, {y}, z) == d_separated(g, {y}, {x}, z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_active_path_exists_iff_connected(seed):
    rng = np.random.default_rng(seed)
    g = random_sl_graph(6, 0.5, rng)
    nodes = list(g.nodes)
    x, y = rng.choice(nodes, 2, replace=False)
    z = {n for n in nodes if n not in (x, y) and rng.random() < 0.3}
    has_path = next(active_paths(g, x, y, z), None) is not None
    assert has_path == d_connected(g, {x}, {y}, z)


# -- criteria ----------------------------------------------------------------

def test_requisite_features():
    assert requisite_features(hiring_graph()) == {"D"}
    assert requisite_features(music_graph(True)) == {"A", "T"}


def test_non_requisite_feature():
    # Z is a feature with no route to U other than through Ŷ
    g = SLGraph([("A", "sensitive"), ("Z", "chance"), ("X", "chance"), ("Y", "target"),
                 ("Yhat", "prediction"), ("U", "utility")],
                [("A", "Z"), ("X", "Y"), ("X", "Yhat"), ("Z", "Yhat"), ("Y", "U"), ("Yhat", "U")])
    assert requisite_features(g) == {"X"}
    assert not itv_criterion(g)


def test_itv_criterion_on_example_graphs():
    r = itv_criterion(hiring_graph())
    assert r.satisfied and r.feature == "D" and r.path == ("A", "D")
    assert itv_criterion(music_graph()).feature == "T"
    assert itv_criterion(degrees_graph()).feature == "Degree"


def test_sensitive_feature_counts_as_its_own_witness():
    g = SLGraph([("A", "sensitive"), ("Y", "target"), ("Yhat", "prediction"), ("U", "utility")],
                [("A", "Y"), ("A", "Yhat"), ("Y", "U"), ("Yhat", "U")])
    r = itv_criterion(g)
    assert r.satisfied and r.feature == "A" and r.path == ("A",)


def test_padmissible_criterion():
    assert not padmissible_itv_criterion(hiring_graph())
    assert not padmissible_extra_condition(hiring_graph())
    assert padmissible_itv_criterion(music_graph())
    assert not padmissible_itv_criterion(music_graph(True))   # A is a feature
    assert padmissible_itv_criterion(degrees_graph())


def test_directed_paths_via_degree():
    g = degrees_graph()
    sub = directed_paths_via(g, "Degree")
    assert set(sub) == {("A", "Degree"), ("Degree", "Y"), ("Degree", "Yhat")}
    assert psie_criterion(g, sub).path == ("A", "Degree", "Yhat")


def test_directed_paths_via_rejects_endpoints():
    with pytest.raises(GraphError):
        directed_paths_via(degrees_graph(), "Y")


def test_empty_subgraph_fails_psie_criterion():
    g = degrees_graph()
    assert not psie_criterion(g, EdgeSubgraph(g, ()))


def test_edge_subgraph_rejects_foreign_edges():
    with pytest.raises(GraphError):
        EdgeSubgraph(degrees_graph(), [("Y", "A")])
