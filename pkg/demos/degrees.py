"""Degrees: a predictor can reduce total variation while introducing it along a path."""

from itv_audit.experiments import load_example
from itv_audit.graph import directed_paths_via, psie_criterion
from itv_audit.metrics import itv, psie_details
from itv_audit.policy import solve

for example in ("degrees", "degrees_coding"):
    model, groups, _ = load_example(example)
    policy = solve(model)[0]
    paths = directed_paths_via(model.graph, "Degree")
    res = psie_details(model, policy, paths, groups)
    print(f"{example}: policy { {k: round(v, 4) for k, v in policy.table.items()} }")
    print(f"  ITV = {itv(model, policy, groups)[0]:+.4f}")
    print(f"  via Degree: PSE(Yhat) = {res.pse_prediction:+.4f}, PSE(Y) = {res.pse_target:+.4f}, "
          f"PSIE = {res.value:+.4f}; criterion {bool(psie_criterion(model.graph, paths))}")
