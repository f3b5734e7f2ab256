"""Total variation, information quantities and path-specific introduced effects."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itv_audit.experiments import load_example
from itv_audit.graph import EdgeSubgraph, directed_paths_via
from itv_audit.metrics import (Variation, atv, classify, conditional_mutual_information, entropy,
                               fairness_report, info_suite, itv, itv_from_joint, mutual_information, psie,
                               psie_details, separation_holds, sufficiency_holds)
from itv_audit.policy import solve
from itv_audit.scm import GroupSpec, JointTable, UndefinedConditionalError, joint_distribution

from helpers import random_model, random_policy

ROLES = {"sensitive": "A", "target": "Y", "prediction": "Yhat"}


def make_joint(probs, y_dom=(0, 1), yhat_dom=(0, 1)):
    probs = np.asarray(probs, dtype=float)
    return JointTable(["A", "Y", "Yhat"], [(0, 1), y_dom, yhat_dom], probs / probs.sum(), ROLES)


def mi_direct(p_xy):
    """I(X;Y) in bits straight from the definition."""
    px, py = p_xy.sum(1), p_xy.sum(0)
    total = 0.0
    for i in range(p_xy.shape[0]):
        for j in range(p_xy.shape[1]):
            if p_xy[i, j] > 0:
                total += p_xy[i, j] * np.log2(p_xy[i, j] / (px[i] * py[j]))
    return total


# -- total variation ---------------------------------------------------------

def test_hiring_atv():
    model, groups, _ = load_example("hiring_v2")
    joint = joint_distribution(model, solve(model)[0])
    assert atv(joint, "Y", groups) == pytest.approx(-0.012, abs=1e-12)
    assert atv(joint, "Yhat", groups) == pytest.approx(-0.6, abs=1e-12)
    assert atv(joint, "Y", groups.swapped()) == pytest.approx(0.012, abs=1e-12)


def test_music_atv_y_is_zero():
    model, groups, _ = load_example("music")
    assert atv(joint_distribution(model), "Y", groups) == pytest.approx(0.0, abs=1e-12)


def test_atv_of_constant():
    joint = make_joint(np.ones((2, 2, 1)), yhat_dom=(0.3,))
    assert atv(joint, "Yhat", GroupSpec(0, 1)) == 0.0


def test_atv_zero_mass_group():
    p = np.zeros((2, 2, 2))
    p[0] = 1.0
    with pytest.raises(UndefinedConditionalError):
        atv(make_joint(p), "Y", GroupSpec(0, 1))


@pytest.mark.parametrize("example, value, kind", [
    ("hiring_v2", 0.588, Variation.INTRODUCED),
    ("hiring_v1", 0.0, Variation.REPRODUCED),
    ("degrees", -1.28, Variation.REDUCED),
    ("music", 0.05, Variation.INTRODUCED),
    ("music_with_a", 0.0, Variation.REPRODUCED),
])
def test_itv_examples(example, value, kind):
    model, groups, _ = load_example(example)
    got, cls = itv(model, solve(model)[0], groups)
    assert got == pytest.approx(value, abs=1e-9)
    assert cls is kind


def test_classify_band():
    assert classify(5e-10) is Variation.REPRODUCED
    assert classify(-5e-10) is Variation.REPRODUCED
    assert classify(2e-9) is Variation.INTRODUCED
    assert classify(-2e-9) is Variation.REDUCED


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_atv_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    joint = make_joint(rng.dirichlet(np.ones(8)).reshape(2, 2, 2))
    g = GroupSpec(0, 1)
    assert atv(joint, "Yhat", g) == pytest.approx(-atv(joint, "Yhat", g.swapped()), abs=1e-12)


# -- separation and sufficiency ---------------------------------------------

def test_hiring_v1_lacks_separation():
    model, groups, _ = load_example("hiring_v1")
    joint = joint_distribution(model, solve(model)[0])
    ok, gap = separation_holds(joint)
    assert not ok and gap > 0


def test_perfect_predictor():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0], p[0, 1, 1], p[1, 0, 0], p[1, 1, 1] = 0.1, 0.4, 0.3, 0.2
    joint = make_joint(p)
    assert separation_holds(joint) == (True, pytest.approx(0.0, abs=1e-12))
    assert sufficiency_holds(joint) == (True, pytest.approx(0.0, abs=1e-12))


def test_independent_predictor():
    rng = np.random.default_rng(3)
    p_ay = rng.dirichlet(np.ones(4)).reshape(2, 2)
    p = p_ay[:, :, None] * np.array([0.3, 0.7])[None, None, :]
    ok, gap = separation_holds(make_joint(p))
    assert ok and gap == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_separation_bounds_itv(seed, n_levels):
    # Ŷ drawn from a distribution that depends on Y alone, with values in [0, 1]
    rng = np.random.default_rng(seed)
    p_ay = rng.dirichlet(np.ones(4)).reshape(2, 2)
    levels = tuple(sorted(set(np.round(rng.uniform(0, 1, n_levels), 12)))) or (0.5,)
    k = rng.dirichlet(np.ones(len(levels)), size=2)
    p = p_ay[:, :, None] * k[None, :, :]
    joint = make_joint(p, yhat_dom=levels)
    assert separation_holds(joint)[0]
    assert itv_from_joint(joint, GroupSpec(0, 1)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_sufficiency_bounds_itv(seed, n_levels):
    # binary Ŷ, Y depends on Ŷ alone and takes values in [0, 1]
    rng = np.random.default_rng(seed)
    p_ayhat = rng.dirichlet(np.ones(4)).reshape(2, 2)
    levels = tuple(sorted(set(np.round(rng.uniform(0, 1, n_levels), 12)))) or (0.5,)
    k = rng.dirichlet(np.ones(len(levels)), size=2)      # P(Y | Ŷ)
    p = p_ayhat[:, None, :] * k.T[None, :, :]
    joint = make_joint(p, y_dom=levels)
    assert sufficiency_holds(joint)[0]
    assert itv_from_joint(joint, GroupSpec(0, 1)) >= -1e-9


# -- information ----------------------------------------------------------

def test_entropy_of_fair_coin():
    joint = make_joint(np.ones((2, 2, 2)))
    assert entropy(joint, ["A"]) == pytest.approx(1.0)
    assert entropy(joint, ["A", "Y", "Yhat"]) == pytest.approx(3.0)
    assert entropy(joint, []) == 0.0


def test_hiring_v2_imi_matches_direct_sum():
    model, _, _ = load_example("hiring_v2")
    joint = joint_distribution(model, solve(model)[0])
    suite = info_suite(joint)
    m = joint.marginal(["A", "Yhat"]).probs
    l = joint.marginal(["A", "Y"]).probs
    assert suite.independence_gap == pytest.approx(mi_direct(m), abs=1e-12)
    assert suite.legacy == pytest.approx(mi_direct(l), abs=1e-12)
    assert suite.imi == pytest.approx(mi_direct(m) - mi_direct(l), abs=1e-12)


def test_imi_zero_when_independent():
    p = np.einsum("a,y,h->ayh", [0.4, 0.6], [0.3, 0.7], [0.5, 0.5])
    assert info_suite(make_joint(p)).imi == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3), st.integers(2, 3))
def test_imi_identity(seed, ny, nyh):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(2 * ny * nyh, 0.5)).reshape(2, ny, nyh)
    joint = make_joint(p, y_dom=tuple(range(ny)), yhat_dom=tuple(range(nyh)))
    s = info_suite(joint)
    assert s.independence_gap - s.legacy == pytest.approx(s.separation_gap - s.sufficiency_gap, abs=1e-9)
    for v in (s.independence_gap, s.legacy, s.separation_gap, s.sufficiency_gap):
        assert v >= -1e-12
    assert mutual_information(joint, ["A"], ["Y"]) == pytest.approx(mi_direct(p.sum(2)), abs=1e-9)
    assert conditional_mutual_information(joint, ["A"], ["Y"], []) == pytest.approx(s.legacy, abs=1e-12)


# -- path-specific introduced effect ----------------------------------------

def test_degrees_psie():
    model, groups, _ = load_example("degrees")
    pol = solve(model)[0]
    res = psie_details(model, pol, directed_paths_via(model.graph, "Degree"), groups)
    assert res.value == pytest.approx(0.72, abs=1e-9)
    assert res.pse_target == pytest.approx(0.0, abs=1e-9)
    assert psie(model, pol, EdgeSubgraph(model.graph, ()), groups) == pytest.approx(0.0, abs=1e-12)


def test_degrees_coding_psie_positive():
    model, groups, _ = load_example("degrees_coding")
    pol = solve(model)[0]
    assert pol.table[("maths",)] == pytest.approx(5.36, abs=1e-12)
    value = psie(model, pol, directed_paths_via(model.graph, "Degree"), groups)
    assert value == pytest.approx(0.432, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_psie_bounded_by_prediction_effect(seed):
    model, rng = random_model(seed, prediction_domain=(0, 1))
    pol = random_policy(model, rng)
    edges = [e for e in model.graph.edges if e[1] != "U" and rng.random() < 0.6]
    res = psie_details(model, pol, EdgeSubgraph(model.graph, edges), GroupSpec(0, 1))
    assert res.value <= abs(res.pse_prediction) + 1e-12


def test_psie_magnitude_can_exceed_prediction_effect():
    # switching only A -> Y moves Y by -2 and leaves Ŷ alone, so PSIE = -2:
    # the signed bound above is the only one that holds in general
    model, groups, _ = load_example("degrees")
    res = psie_details(model, solve(model)[0], EdgeSubgraph(model.graph, [("A", "Y")]), groups)
    assert res.pse_prediction == pytest.approx(0.0, abs=1e-12)
    assert res.value == pytest.approx(-2.0, abs=1e-9)


def test_fairness_report_fields():
    model, groups, _ = load_example("hiring_v2")
    rep = fairness_report(model, solve(model)[0], groups)
    d = rep.to_dict()
    assert d["classification"] == "introduced"
    assert d["itv"] == pytest.approx(0.588)
    assert d["imi"] == pytest.approx(d["separation_gap"] - d["sufficiency_gap"], abs=1e-9)
    assert d["sufficiency"] is True
