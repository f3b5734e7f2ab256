"""Hiring: the same graph can reproduce or introduce variation depending on the loss.

Under squared error the optimal score is the conditional mean of Y given the
degree, and ITV is zero.  Under zero-one loss the thresholded prediction widens
a 1.2 point gap in ability into a 60 point gap in hiring rates.
"""

from itv_audit.experiments import load_example
from itv_audit.graph import itv_criterion, padmissible_itv_criterion
from itv_audit.metrics import fairness_report
from itv_audit.policy import solve

for example in ("hiring_v1", "hiring_v2"):
    model, groups, loss = load_example(example)
    policy = solve(model)[0]
    report = fairness_report(model, policy, groups)
    print(f"{example} ({loss.kind})")
    print(f"  policy: {policy.table}")
    print(f"  ATV(Y) = {report.atv_y:+.4f}, ATV(Yhat) = {report.atv_yhat:+.4f}")
    print(f"  ITV = {report.itv:+.4f} ({report.classification.value})")

graph = model.graph
print(f"ITV criterion: {bool(itv_criterion(graph))}; "
      f"squared-error criterion: {bool(padmissible_itv_criterion(graph))}")
