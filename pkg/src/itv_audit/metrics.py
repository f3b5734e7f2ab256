"""Introduced-unfairness measures.

Total-variation measures (ATV, ITV), path-specific introduced effects, and the
information-theoretic suite (independence gap, legacy, separation and
sufficiency gaps, introduced mutual information).  Information quantities are
in bits.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .graph import EdgeSubgraph
from .scm import (GroupSpec, JointTable, ModelError, StructuralModel, UndefinedConditionalError,
                  joint_distribution, path_specific_effect)

CLASSIFY_TOL = 1e-9
INDEPENDENCE_EPS = 1e-9


class Variation(str, Enum):
    INTRODUCED = "introduced"
    REPRODUCED = "reproduced"
    REDUCED = "reduced"


def classify(itv_value: float, tol: float = CLASSIFY_TOL) -> Variation:
    if itv_value > tol:
        return Variation.INTRODUCED
    if itv_value < -tol:
        return Variation.REDUCED
    return Variation.REPRODUCED


def atv(joint: JointTable, var: str, groups: GroupSpec, sensitive: str | None = None) -> float:
    """E(var | A=a1) - E(var | A=a0)."""
    a = sensitive or joint.role("sensitive")
    for g in (groups.a0, groups.a1):
        if joint.prob({a: g}) <= 0.0:
            raise UndefinedConditionalError(f"group {a}={g!r} has probability zero")
    return joint.expectation(var, {a: groups.a1}) - joint.expectation(var, {a: groups.a0})


def itv_from_joint(joint: JointTable, groups: GroupSpec) -> float:
    return (abs(atv(joint, joint.role("prediction"), groups))
            - abs(atv(joint, joint.role("target"), groups)))


def itv(model: StructuralModel, policy, groups: GroupSpec | None = None) -> tuple[float, Variation]:
    """|ATV(Ŷ)| - |ATV(Y)| under ``policy`` and its three-way classification."""
    groups = groups or model.groups
    value = itv_from_joint(joint_distribution(model, policy), groups)
    return value, classify(value)


# ---------------------------------------------------------------------------
# information theory


def entropy(joint: JointTable, variables: Sequence[str]) -> float:
    """Joint entropy H(variables) in bits, with 0 log 0 = 0."""
    if not variables:
        return 0.0
    p = joint.marginal(list(variables)).probs.ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def conditional_entropy(joint: JointTable, x: Sequence[str], given: Sequence[str]) -> float:
    return entropy(joint, list(x) + list(given)) - entropy(joint, list(given))


def mutual_information(joint: JointTable, x: Sequence[str], y: Sequence[str]) -> float:
    return entropy(joint, x) + entropy(joint, y) - entropy(joint, list(x) + list(y))


def conditional_mutual_information(joint: JointTable, x: Sequence[str], y: Sequence[str],
                                   given: Sequence[str]) -> float:
    """I(x; y | given) = H(x,given) + H(y,given) - H(x,y,given) - H(given)."""
    x, y, z = list(x), list(y), list(given)
    return entropy(joint, x + z) + entropy(joint, y + z) - entropy(joint, x + y + z) - entropy(joint, z)


@dataclass(frozen=True)
class InfoSuite:
    h_a: float
    h_y: float
    h_yhat: float
    h_y_given_a: float
    h_yhat_given_a: float
    independence_gap: float
    legacy: float
    separation_gap: float
    sufficiency_gap: float

    @property
    def imi(self) -> float:
        """Introduced mutual information I(Ŷ;A) - I(Y;A)."""
        return self.independence_gap - self.legacy


def info_suite(joint: JointTable, sensitive: str | None = None, target: str | None = None,
               prediction: str | None = None) -> InfoSuite:
    a = sensitive or joint.role("sensitive")
    y = target or joint.role("target")
    yh = prediction or joint.role("prediction")
    return InfoSuite(
        h_a=entropy(joint, [a]),
        h_y=entropy(joint, [y]),
        h_yhat=entropy(joint, [yh]),
        h_y_given_a=conditional_entropy(joint, [y], [a]),
        h_yhat_given_a=conditional_entropy(joint, [yh], [a]),
        independence_gap=mutual_information(joint, [yh], [a]),
        legacy=mutual_information(joint, [y], [a]),
        separation_gap=conditional_mutual_information(joint, [yh], [a], [y]),
        sufficiency_gap=conditional_mutual_information(joint, [y], [a], [yh]),
    )


def separation_holds(joint: JointTable, eps: float = INDEPENDENCE_EPS) -> tuple[bool, float]:
    """Ŷ ⊥ A | Y, judged by the separation gap I(Ŷ;A|Y) <= eps."""
    gap = conditional_mutual_information(joint, [joint.role("prediction")], [joint.role("sensitive")],
                                         [joint.role("target")])
    return gap <= eps, gap


def sufficiency_holds(joint: JointTable, eps: float = INDEPENDENCE_EPS) -> tuple[bool, float]:
    """Y ⊥ A | Ŷ, judged by the sufficiency gap I(Y;A|Ŷ) <= eps."""
    gap = conditional_mutual_information(joint, [joint.role("target")], [joint.role("sensitive")],
                                         [joint.role("prediction")])
    return gap <= eps, gap


# ---------------------------------------------------------------------------
# path-specific introduced effects


@dataclass(frozen=True)
class PSIEResult:
    value: float
    pse_prediction: float
    pse_target: float
    coupling_dependent: bool

    def __float__(self):
        return self.value


def psie_details(model: StructuralModel, policy, subgraph: EdgeSubgraph,
                 groups: GroupSpec | None = None) -> PSIEResult:
    groups = groups or model.groups
    g = model.graph
    e_hat = path_specific_effect(model, policy, subgraph, g.prediction, groups.a0, groups.a1)
    e_y = path_specific_effect(model, policy, subgraph, g.target, groups.a0, groups.a1)
    return PSIEResult(abs(e_hat.value) - abs(e_y.value), e_hat.value, e_y.value,
                      e_hat.coupling_dependent or e_y.coupling_dependent)


def psie(model: StructuralModel, policy, subgraph: EdgeSubgraph, groups: GroupSpec | None = None) -> float:
    """|PSE_P(Ŷ)| - |PSE_P(Y)|."""
    return psie_details(model, policy, subgraph, groups).value


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FairnessReport:
    atv_y: float
    atv_yhat: float
    itv: float
    classification: Variation
    separation: bool
    separation_gap: float
    sufficiency: bool
    sufficiency_gap: float
    imi: float
    independence_gap: float
    legacy: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        return d


def fairness_report(model: StructuralModel, policy, groups: GroupSpec | None = None,
                    eps: float = INDEPENDENCE_EPS, tol: float = CLASSIFY_TOL) -> FairnessReport:
    groups = groups or model.groups
    if groups is None:
        raise ModelError("fairness report needs a0/a1 groups")
    joint = joint_distribution(model, policy)
    a_y = atv(joint, joint.role("target"), groups)
    a_hat = atv(joint, joint.role("prediction"), groups)
    value = abs(a_hat) - abs(a_y)
    info = info_suite(joint)
    sep, sep_gap = separation_holds(joint, eps)
    suf, suf_gap = sufficiency_holds(joint, eps)
    return FairnessReport(a_y, a_hat, value, classify(value, tol), sep, sep_gap, suf, suf_gap,
                          info.imi, info.independence_gap, info.legacy)
