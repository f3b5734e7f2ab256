"""Deterministic predictors and exact optimal-policy solvers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .scm import (CapacityError, JointTable, LossSpec, ModelError, StructuralModel,
                  is_numeric, joint_distribution)

TIE_TOL = 1e-9
DEFAULT_POLICY_CAP = 10**6


@dataclass(frozen=True)
class Policy:
    """
    Deterministic map from feature assignments to predictions.

    ``table`` is total over the product of feature domains; rows listed in
    ``unreachable`` have probability zero and carry a filler value.
    """
    features: tuple[str, ...]
    table: Mapping[tuple, Any]
    unreachable: frozenset = frozenset()

    def __call__(self, *values):
        return self.table[tuple(values)]

    @property
    def reachable_rows(self) -> list[tuple]:
        return [r for r in self.table if r not in self.unreachable]

    def key(self) -> tuple:
        """Hashable identity over reachable rows."""
        return tuple((r, self.table[r]) for r in self.reachable_rows)

    def lift(self, model: StructuralModel, unreachable: Iterable[tuple] = ()) -> "Policy":
        """Extend a policy on a subset of features to all of ``model``'s features."""
        full = model.graph.features
        pos = [full.index(f) for f in self.features]
        table = {row: self.table[tuple(row[i] for i in pos)] for row in model.feature_rows()}
        return Policy(tuple(full), table, frozenset(unreachable))

    def rows_text(self) -> list[dict]:
        return [{"features": dict(zip(self.features, r)), "prediction": v, "reachable": r not in self.unreachable}
                for r, v in self.table.items()]


class PolicySet(Sequence):
    """
    All optimal policies of a solver.

    Either a row-wise product (``options`` maps each reachable row to its
    optimal predictions) or an explicit member list.
    """

    def __init__(self, features, rows: Sequence[tuple], filler: Mapping[tuple, Any],
                 options: Mapping[tuple, tuple] | None = None, members: Sequence[Policy] | None = None,
                 utility: float | None = None):
        self.features = tuple(features)
        self.rows = list(rows)
        self.filler = dict(filler)
        self.options = dict(options) if options is not None else None
        self._members = list(members) if members is not None else None
        self.utility = utility

    def __len__(self):
        if self._members is not None:
            return len(self._members)
        return math.prod(len(self.options[r]) for r in self.rows)

    def _make(self, choice) -> Policy:
        table = dict(self.filler)
        table.update(zip(self.rows, choice))
        return Policy(self.features, table, frozenset(self.filler))

    def __iter__(self) -> Iterator[Policy]:
        if self._members is not None:
            yield from self._members
            return
        for choice in itertools.product(*(self.options[r] for r in self.rows)):
            yield self._make(choice)

    def __getitem__(self, i):
        if self._members is not None:
            return self._members[i]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        choice = []
        for r in reversed(self.rows):
            opts = self.options[r]
            i, k = divmod(i, len(opts))
            choice.append(opts[k])
        return self._make(tuple(reversed(choice)))

    def keys(self) -> set:
        return {p.key() for p in self}

    def __repr__(self):
        return f"PolicySet({len(self)} policies over {self.features})"


def _feature_table(model: StructuralModel) -> tuple[JointTable, list[tuple], np.ndarray, np.ndarray]:
    """Joint of (features, Y): rows, P(row) and P(row, y) as arrays."""
    g = model.graph
    feats, y = list(g.features), g.target
    joint = joint_distribution(model)
    m = joint.marginal(feats + [y])
    rows = model.feature_rows()
    pxy = m.probs.reshape(len(rows), len(model.domains[y]))
    return m, rows, pxy.sum(axis=1), pxy


def _filler(model: StructuralModel):
    dom = model.prediction_domain
    if dom:
        return min(dom, key=_value_key)
    return min(model.domains[model.graph.target], key=_value_key)


def _value_key(v):
    return (0, float(v), "") if is_numeric(v) else (1, 0.0, str(v))


def expected_utility(model: StructuralModel, policy: Policy, loss: LossSpec | None = None,
                     capacity: int | None = None) -> float:
    """Exact E[f_U(Y, Ŷ)] with ``policy`` substituted for the prediction node."""
    loss = loss or model.loss
    g = model.graph
    joint = joint_distribution(model, policy, capacity).marginal([g.target, g.prediction])
    total = 0.0
    for (y, yhat), p in joint.items():
        total += p * loss.utility(y, yhat)
    return total


def p_admissible_policy(model: StructuralModel) -> Policy:
    """Conditional-expectation predictor π(pa) = E(Y | pa)."""
    y_dom = model.domains[model.graph.target]
    if not all(is_numeric(v) for v in y_dom):
        raise ModelError("P-admissible predictor needs a numeric target")
    _, rows, prow, pxy = _feature_table(model)
    filler = _filler(model)
    y_vals = np.asarray(y_dom, dtype=float)
    table, unreachable = {}, set()
    for row, pr, py in zip(rows, prow, pxy):
        if pr > 0.0:
            table[row] = float(py @ y_vals / pr)
        else:
            table[row] = filler
            unreachable.add(row)
    return Policy(model.graph.features, table, frozenset(unreachable))


def _check_zero_one(model: StructuralModel):
    y_dom = model.domains[model.graph.target]
    pred_dom = model.prediction_domain or y_dom
    if not set(y_dom) <= set(pred_dom):
        raise ModelError("zero-one loss needs the prediction domain to contain the target domain")
    return y_dom, pred_dom


def optimal_policies_zero_one(model: StructuralModel, tol: float = TIE_TOL) -> PolicySet:
    """Every policy picking, row by row, a most probable label of Y."""
    y_dom, pred_dom = _check_zero_one(model)
    _, rows, prow, pxy = _feature_table(model)
    filler = _filler(model) if model.prediction_domain else min(y_dom, key=_value_key)
    reachable, options, unreachable = [], {}, {}
    for row, pr, py in zip(rows, prow, pxy):
        if pr <= 0.0:
            unreachable[row] = filler
            continue
        cond = {v: py[i] / pr for i, v in enumerate(y_dom)}
        scores = [cond.get(v, 0.0) for v in pred_dom]
        best = max(scores)
        reachable.append(row)
        options[row] = tuple(v for v, s in zip(pred_dom, scores) if s >= best - tol)
    ps = PolicySet(model.graph.features, reachable, unreachable, options=options)
    return ps


def optimal_policies_bruteforce(model: StructuralModel, loss: LossSpec | None = None,
                                prediction_domain: Sequence | None = None,
                                cap: int = DEFAULT_POLICY_CAP, tol: float = TIE_TOL) -> PolicySet:
    """Score every deterministic policy exactly and keep those within ``tol`` of the best."""
    loss = loss or model.loss
    prediction_domain = tuple(prediction_domain if prediction_domain is not None
                              else model.prediction_domain)
    if not prediction_domain:
        raise ModelError("brute force needs a finite prediction domain")
    joint = joint_distribution(model)
    g = model.graph
    feats = list(g.features)
    prow = joint.marginal(feats).probs.reshape(-1) if feats else np.ones(1)
    rows = model.feature_rows()
    reachable = [r for r, p in zip(rows, prow) if p > 0.0]
    filler = min(prediction_domain, key=_value_key)
    unreachable = {r: filler for r, p in zip(rows, prow) if p <= 0.0}
    n = len(prediction_domain) ** len(reachable)
    if n > cap:
        raise CapacityError(f"{n} candidate policies exceed the brute-force cap of {cap}")
    scored = []
    for choice in itertools.product(prediction_domain, repeat=len(reachable)):
        table = dict(unreachable)
        table.update(zip(reachable, choice))
        pol = Policy(tuple(feats), table, frozenset(unreachable))
        scored.append((expected_utility(model, pol, loss), pol))
    best = max(s for s, _ in scored)
    members = [p for s, p in scored if s >= best - tol]
    return PolicySet(feats, reachable, unreachable, members=members, utility=best)


def solve(model: StructuralModel, loss: LossSpec | None = None, tol: float = TIE_TOL) -> PolicySet:
    """Optimal policies for the model's (or the given) loss."""
    loss = loss or model.loss
    if loss.kind == "zero_one":
        return optimal_policies_zero_one(model, tol)
    if loss.kind == "mse":
        pol = p_admissible_policy(model)
        rows = pol.reachable_rows
        return PolicySet(pol.features, rows, {r: pol.table[r] for r in pol.unreachable},
                         options={r: (pol.table[r],) for r in rows})
    return optimal_policies_bruteforce(model, loss, tol=tol)


def requisite_policies(model: StructuralModel, features: Iterable[str],
                       loss: LossSpec | None = None) -> list[Policy]:
    """
    Optimal policies that read only ``features``, lifted to the full feature set.

    Solving on the reduced feature set and lifting gives a policy that ignores
    every other feature; with requisite features this is still optimal overall.
    """
    loss = loss or model.loss
    reduced = model.with_features(features)
    full_rows = model.feature_rows()
    joint = joint_distribution(model)
    feats = list(model.graph.features)
    prow = joint.marginal(feats).probs.reshape(-1) if feats else np.ones(1)
    unreachable = [r for r, p in zip(full_rows, prow) if p <= 0.0]
    return [p.lift(model, unreachable) for p in solve(reduced, loss)]
