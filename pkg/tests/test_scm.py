"""Structural models, exact inference and path-specific effects."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itv_audit.experiments import degrees_graph, hiring_graph, load_example
from itv_audit.graph import EdgeSubgraph, NodeRole, directed_paths_via
from itv_audit.policy import solve
from itv_audit.scm import (CapacityError, ExogenousSpec, GroupSpec, ModelError,
                           StructuralModel, UndefinedConditionalError, cpt_to_structural,
                           enumerate_exogenous, from_cpts, induced_cpt, intervene, joint_distribution,
                           path_specific_effect, pse, query)

from helpers import random_model, random_policy


# -- CPT conversion ----------------------------------------------------------

def test_cpt_to_structural_merges_breakpoints():
    exo, f = cpt_to_structural(np.array([[0.3, 0.7], [0.3, 0.7]]))
    assert exo.probs == pytest.approx((0.3, 0.7))
    assert f.tolist() == [[0, 1], [0, 1]]


def test_cpt_to_structural_rejects_bad_rows():
    with pytest.raises(ModelError):
        cpt_to_structural(np.array([[0.3, 0.6]]))
    with pytest.raises(ModelError):
        cpt_to_structural(np.array([[-0.1, 1.1]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(2, 4), st.integers(0, 10**6))
def test_induced_cpt_recovers_source(n_rows, n_vals, seed):
    rng = np.random.default_rng(seed)
    rows = rng.dirichlet(np.ones(n_vals), size=n_rows)
    exo, f = cpt_to_structural(rows)
    onehot = np.eye(n_vals)[f]
    back = (onehot * np.asarray(exo.probs)[:, None]).sum(axis=-2)
    assert np.allclose(back, rows, atol=1e-12)


def test_cpt_dict_missing_row():
    g = hiring_graph()
    with pytest.raises(ModelError, match="misses row"):
        from_cpts(g, {"A": (0, 1), "D": (0, 1), "Y": (0, 1), "Yhat": (0, 1)},
                  {"A": [0.5, 0.5], "D": {(0,): [0.5, 0.5]}, "Y": [[0.5, 0.5], [0.5, 0.5]]})


def test_from_callables_rejects_out_of_domain():
    g = hiring_graph()
    point = ExogenousSpec.point()
    mech = {"A": (point, lambda pa, e: 0), "D": (point, lambda pa, e: 7), "Y": (point, lambda pa, e: 0)}
    with pytest.raises(ModelError):
        StructuralModel.from_callables(g, {"A": (0, 1), "D": (0, 1), "Y": (0, 1), "Yhat": (0, 1)}, mech)


def test_groups_must_be_in_domain():
    with pytest.raises(ModelError):
        GroupSpec(1, 1)
    model, _, _ = load_example("hiring_v2")
    with pytest.raises(ModelError):
        StructuralModel(model.graph, model.domains, model.exogenous, model.functions, model.loss,
                        GroupSpec("male", "other"))


# -- inference ----------------------------------------------------------------

def test_hiring_joint_cell():
    model, groups, _ = load_example("hiring_v2")
    pol = solve(model)[0]
    joint = joint_distribution(model, pol)
    assert joint.prob({"A": "female", "D": "stats", "Y": 0, "Yhat": 0}) == pytest.approx(0.204, abs=1e-12)
    assert joint.total() == pytest.approx(1.0, abs=1e-12)


def test_hiring_conditional_expectations():
    model, _, _ = load_example("hiring_v1")
    joint = joint_distribution(model)
    assert joint.expectation("Y", {"A": "male"}) == pytest.approx(0.506, abs=1e-12)
    assert joint.expectation("Y", {"A": "female"}) == pytest.approx(0.494, abs=1e-12)
    q = query(joint, "D", {"A": "male"})
    assert q.probs == pytest.approx([0.8, 0.2])


def test_condition_on_zero_mass_event():
    model, _, _ = load_example("music")
    joint = joint_distribution(model)
    with pytest.raises(UndefinedConditionalError):
        joint.expectation("Y", {"A": "male", "M": 1, "T": 0})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3))
def test_elimination_matches_enumeration(seed, k):
    model, rng = random_model(seed, n_nodes=6, domain_size=k, prediction_domain=tuple(range(k)))
    pol = random_policy(model, rng, tuple(range(k)))
    fast = joint_distribution(model, pol)
    slow = enumerate_exogenous(model, pol)
    assert fast.variables == slow.variables
    assert np.allclose(fast.probs, slow.probs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_marginals_match_source_cpts(seed):
    model, _ = random_model(seed)
    for v in model.chance_nodes:
        assert np.allclose(induced_cpt(model, v), model.cpts[v], atol=1e-12)


def test_capacity_guard():
    model, _, _ = load_example("music")
    with pytest.raises(CapacityError):
        joint_distribution(model, capacity=3)


def test_intervene_sets_constant():
    model, _, _ = load_example("hiring_v1")
    m = intervene(model, {"A": "female"})
    joint = joint_distribution(m)
    assert joint.prob({"A": "female"}) == 1.0
    assert joint.prob({"D": "stats"}) == pytest.approx(0.8)
    with pytest.raises(ModelError):
        intervene(model, {"A": "robot"})


# -- path-specific effects -------------------------------------------------

def pse_oracle(model, policy, edges, node, a0, a1):
    """E(node) under the two-pass counterfactual, by enumerating every exogenous cell."""
    g = model.graph
    order = [v for v in g.topological_order() if g.role(v) is not NodeRole.UTILITY]
    chance = model.chance_nodes
    a = g.sensitive
    total = 0.0
    for cells in itertools.product(*(range(len(model.exogenous[v].domain)) for v in chance)):
        e = dict(zip(chance, cells))
        w = math.prod(model.exogenous[v].probs[e[v]] for v in chance)
        base, act = {}, {}
        for v in order:
            if v == a:
                base[v], act[v] = a0, a1
                continue
            pb = tuple(base[q] for q in g.parents(v))
            pa = tuple(act[q] if (q, v) in edges else base[q] for q in g.parents(v))
            if g.role(v) is NodeRole.PREDICTION:
                base[v], act[v] = policy.table[pb], policy.table[pa]
            else:
                base[v] = model.function_value(v, pb, e[v])
                act[v] = model.function_value(v, pa, e[v])
        total += w * act[node]
    return total


def test_degrees_pse():
    model, groups, _ = load_example("degrees")
    pol = solve(model)[0]
    sub = directed_paths_via(model.graph, "Degree")
    eff = path_specific_effect(model, pol, sub, "Yhat", groups.a0, groups.a1)
    assert eff.value == pytest.approx(-0.72, abs=1e-9)
    assert pse(model, pol, sub, "Y", groups.a0, groups.a1) == pytest.approx(0.0, abs=1e-9)
    assert not eff.coupling_dependent


def test_empty_subgraph_gives_zero_effect():
    model, groups, _ = load_example("degrees")
    pol = solve(model)[0]
    empty = EdgeSubgraph(model.graph, ())
    assert pse(model, pol, empty, "Yhat", groups.a0, groups.a1) == pytest.approx(0.0, abs=1e-12)


def test_full_subgraph_gives_total_effect():
    model, groups, _ = load_example("degrees")
    pol = solve(model)[0]
    full = EdgeSubgraph(model.graph, [e for e in model.graph.edges if e[1] != "U"])
    total = (joint_distribution(intervene(model, {"A": "woman"}), pol).expectation("Y")
             - joint_distribution(intervene(model, {"A": "man"}), pol).expectation("Y"))
    assert pse(model, pol, full, "Y", "man", "woman") == pytest.approx(total, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_pse_matches_enumeration(seed):
    model, rng = random_model(seed, n_nodes=6, prediction_domain=(0, 1))
    pol = random_policy(model, rng)
    g = model.graph
    edges = [e for e in g.edges if e[1] != "U" and rng.random() < 0.5]
    sub = EdgeSubgraph(g, edges)
    for node in ("Y", "Yhat"):
        eff = path_specific_effect(model, pol, sub, node, 0, 1)
        assert eff.response_mean == pytest.approx(pse_oracle(model, pol, set(edges), node, 0, 1), abs=1e-12)


def test_coupling_flag_raised_when_noise_is_shared():
    # Degree -> Y is left out, so Y reads Degree's baseline value while Ŷ reads
    # its active value; the pair depends on how Degree's noise is shared.
    g = degrees_graph()
    sub = EdgeSubgraph(g, [("A", "Degree"), ("Degree", "Yhat")])
    model, groups, _ = load_example("degrees")
    pol = solve(model)[0]
    eff = path_specific_effect(model, pol, sub, "Yhat", groups.a0, groups.a1)
    assert eff.coupling_dependent
    assert eff.value == pytest.approx(-0.72, abs=1e-9)
