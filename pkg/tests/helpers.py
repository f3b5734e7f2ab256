"""Shared builders for random models used across the tests."""

import numpy as np

from itv_audit.experiments import random_cpts, random_sl_graph
from itv_audit.graph import NodeRole
from itv_audit.policy import Policy
from itv_audit.scm import GroupSpec, LossSpec, from_cpts


def random_model(seed, n_nodes=6, domain_size=2, prediction_domain=None):
    rng = np.random.default_rng(seed)
    g = random_sl_graph(n_nodes, 0.5, rng)
    values = tuple(range(domain_size))
    domains = {v: values for v in g.nodes if g.role(v) is not NodeRole.UTILITY}
    if prediction_domain is not None:
        domains["Yhat"] = prediction_domain
    cpts = random_cpts(g, domains, 1.0, rng)
    return from_cpts(g, domains, cpts, LossSpec.zero_one(), GroupSpec(0, 1)), rng


def random_policy(model, rng, values=(0, 1)):
    rows = model.feature_rows()
    return Policy(model.graph.features, {r: values[rng.integers(len(values))] for r in rows})


# one line per acceptance criterion, printed in the pytest terminal summary
ACCEPTANCE_LINES: list[str] = []
