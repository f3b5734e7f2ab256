"""Music school admissions: three predictors of the same aptitude target."""

from itv_audit.experiments import load_example
from itv_audit.metrics import itv
from itv_audit.policy import p_admissible_policy, solve
from itv_audit.scm import LossSpec

model, groups, _ = load_example("music")
zero_one = solve(model)[0]
print(f"zero-one on T:        {zero_one.table}  ITV = {itv(model, zero_one, groups)[0]:.4f}")

mse = model.with_loss(LossSpec.mse()).with_prediction_domain(())
score = p_admissible_policy(mse)
print(f"squared error on T:   { {k: round(v, 4) for k, v in score.table.items()} }  "
      f"ITV = {itv(mse, score, groups)[0]:.4f}")

with_a, groups_a, _ = load_example("music_with_a")
score_a = p_admissible_policy(with_a)
print(f"squared error on A,T: { {k: round(v, 4) for k, v in score_a.table.items()} }  "
      f"ITV = {itv(with_a, score_a, groups_a)[0]:.4f}")
