"""Auditing introduced total variation in supervised-learning graphs and models."""

from .graph import (CriterionResult, EdgeSubgraph, GraphError, NodeRole, SLGraph, ValidationReport,
                    active_paths, d_connected, d_separated, directed_paths_via, format_path,
                    itv_criterion, padmissible_extra_condition, padmissible_itv_criterion,
                    psie_criterion, requisite_features, shortest_active_path, validate_sl_graph)
from .metrics import (FairnessReport, InfoSuite, PSIEResult, Variation, atv, classify,
                      conditional_entropy, conditional_mutual_information, entropy, fairness_report,
                      info_suite, itv, itv_from_joint, mutual_information, psie, psie_details,
                      separation_holds, sufficiency_holds)
from .policy import (Policy, PolicySet, expected_utility, optimal_policies_bruteforce,
                     optimal_policies_zero_one, p_admissible_policy, requisite_policies, solve)
from .scm import (CapacityError, ExogenousSpec, GroupSpec, JointTable, LossSpec, ModelError,
                  StructuralModel, UndefinedConditionalError, cpt_to_structural, enumerate_exogenous,
                  expectation, from_cpts, induced_cpt, intervene, joint_distribution,
                  path_specific_effect, pse, query)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CriterionResult",
    "EdgeSubgraph",
    "ExogenousSpec",
    "FairnessReport",
    "GraphError",
    "GroupSpec",
    "InfoSuite",
    "JointTable",
    "LossSpec",
    "ModelError",
    "NodeRole",
    "PSIEResult",
    "Policy",
    "PolicySet",
    "SLGraph",
    "StructuralModel",
    "UndefinedConditionalError",
    "ValidationReport",
    "Variation",
    "active_paths",
    "atv",
    "classify",
    "conditional_entropy",
    "conditional_mutual_information",
    "cpt_to_structural",
    "d_connected",
    "d_separated",
    "directed_paths_via",
    "entropy",
    "enumerate_exogenous",
    "expectation",
    "expected_utility",
    "fairness_report",
    "format_path",
    "from_cpts",
    "induced_cpt",
    "info_suite",
    "intervene",
    "itv",
    "itv_criterion",
    "itv_from_joint",
    "joint_distribution",
    "mutual_information",
    "optimal_policies_bruteforce",
    "optimal_policies_zero_one",
    "p_admissible_policy",
    "padmissible_extra_condition",
    "padmissible_itv_criterion",
    "path_specific_effect",
    "pse",
    "psie",
    "psie_criterion",
    "psie_details",
    "query",
    "requisite_features",
    "requisite_policies",
    "separation_holds",
    "shortest_active_path",
    "solve",
    "sufficiency_holds",
    "validate_sl_graph",
]
