"""Worked examples, random models, the incidence experiment and witness models."""

import math

import numpy as np
import pytest

from itv_audit.experiments import (ExampleId, ExperimentConfig, UnsupportedCase, graph_meets, hiring_graph,
                                   itv_incidence, load_example, music_graph, random_sl_model, witness_itv_range,
                                   witness_scm)
from itv_audit.graph import SLGraph, itv_criterion, validate_sl_graph
from itv_audit.metrics import atv, itv
from itv_audit.modelfile import dumps_model
from itv_audit.policy import p_admissible_policy, requisite_policies, solve
from itv_audit.graph import requisite_features
from itv_audit.scm import joint_distribution


def test_every_example_loads():
    for ex in ExampleId:
        model, groups, loss = load_example(ex)
        assert model.groups == groups and model.loss == loss
        assert validate_sl_graph(model.graph).ok


def test_hiring_v2_prediction_gap():
    model, groups, _ = load_example(ExampleId.HIRING_V2)
    joint = joint_distribution(model, solve(model)[0])
    assert abs(atv(joint, "Yhat", groups)) == pytest.approx(0.6, abs=1e-12)


def test_music_table_values():
    model, groups, _ = load_example("music")
    assert itv(model, solve(model)[0], groups)[0] == pytest.approx(0.05, abs=1e-12)
    model, groups, _ = load_example("music_with_a")
    pol = p_admissible_policy(model)
    assert itv(model, pol, groups)[0] == pytest.approx(0.0, abs=1e-12)
    assert pol.table[("male", 0)] == pytest.approx(0.05, abs=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n_samples=0)
    with pytest.raises(ValueError):
        ExperimentConfig(edge_prob=1.5)
    with pytest.raises(ValueError):
        ExperimentConfig(itv_threshold=-1)
    with pytest.raises(ValueError):
        ExperimentConfig(criterion="theorem9")
    assert ExperimentConfig(loss="mse").effective_criterion == "theorem2"


@pytest.mark.parametrize("criterion", ["theorem1", "theorem2", "not_theorem1", "not_theorem2_extra"])
def test_random_model_meets_criterion(criterion):
    config = ExperimentConfig(criterion=criterion)
    for seed in range(10):
        model, groups, attempts = random_sl_model(config, np.random.default_rng(seed))
        assert validate_sl_graph(model.graph).ok
        assert graph_meets(model.graph, criterion)
        assert attempts >= 1


def test_random_model_is_deterministic():
    config = ExperimentConfig()
    a, _, _ = random_sl_model(config, np.random.default_rng([5, 3]))
    b, _, _ = random_sl_model(config, np.random.default_rng([5, 3]))
    assert dumps_model(a) == dumps_model(b)


def test_large_alpha_flattens_cpts():
    config = ExperimentConfig(dirichlet_alpha=1e6, domain_size=3)
    model, _, _ = random_sl_model(config, np.random.default_rng(0))
    for table in model.cpts.values():
        assert np.allclose(table, 1 / 3, atol=0.01)


def test_rejection_budget():
    config = ExperimentConfig(edge_prob=0.0, max_attempts=20)
    with pytest.raises(RuntimeError):
        random_sl_model(config, np.random.default_rng(0))


def test_incidence_reproducible_and_worker_independent():
    config = ExperimentConfig(n_samples=30, seed=11)
    a = itv_incidence(config)
    b = itv_incidence(config)
    assert a.records == b.records and a.fraction == b.fraction
    c = itv_incidence(ExperimentConfig(n_samples=30, seed=11, workers=2))
    assert [r.itv for r in c.records] == [r.itv for r in a.records]
    assert a.fraction == a.n_with_itv_above_threshold / a.n_satisfying_criterion


def test_incidence_infinite_threshold():
    result = itv_incidence(ExperimentConfig(n_samples=20, itv_threshold=math.inf))
    assert result.fraction == 0.0


def test_records_store_range_over_optima():
    result = itv_incidence(ExperimentConfig(n_samples=40, seed=2))
    for r in result.records:
        assert r.error is None
        assert r.itv <= r.itv_max and r.n_optima >= 1


# -- soundness sweeps (smaller than the acceptance suite) -------------------

def test_theorem1_soundness_sample():
    config = ExperimentConfig(criterion="not_theorem1")
    for seed in range(25):
        model, groups, _ = random_sl_model(config, np.random.default_rng([99, seed]))
        for pol in requisite_policies(model, requisite_features(model.graph)):
            assert abs(atv(joint_distribution(model, pol), "Yhat", groups)) <= 1e-9


def test_theorem2_soundness_sample():
    config = ExperimentConfig(loss="mse", criterion="not_theorem2_extra")
    for seed in range(25):
        model, groups, _ = random_sl_model(config, np.random.default_rng([98, seed]))
        assert abs(itv(model, p_admissible_policy(model), groups)[0]) <= 1e-9


# -- witness models ---------------------------------------------------------

def test_witness_case1():
    model = witness_scm(hiring_graph())
    lo, hi, n = witness_itv_range(model)
    assert n == 1 and lo == pytest.approx(0.98, abs=1e-9) and hi == lo


def test_witness_case2a():
    lo, hi, n = witness_itv_range(witness_scm(music_graph()))
    assert lo == pytest.approx(0.8, abs=1e-9) and hi == lo


def test_witness_needs_criterion():
    g = SLGraph([("A", "sensitive"), ("X", "chance"), ("Y", "target"), ("Yhat", "prediction"), ("U", "utility")],
                [("X", "Y"), ("X", "Yhat"), ("Y", "U"), ("Yhat", "U")])
    assert not itv_criterion(g)
    with pytest.raises(Exception, match="does not satisfy"):
        witness_scm(g)


def test_witness_on_random_graphs():
    config = ExperimentConfig(criterion="theorem1")
    built = 0
    for seed in range(15):
        model, _, _ = random_sl_model(config, np.random.default_rng([7, seed]))
        try:
            witness = witness_scm(model.graph)
        except UnsupportedCase:
            continue
        built += 1
        assert witness_itv_range(witness)[0] > 0
    assert built > 0
