"""How often do random models that meet a criterion actually introduce variation?"""

import sys

from itv_audit.experiments import ExperimentConfig, itv_incidence

samples = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
for loss in ("zero_one", "mse"):
    result = itv_incidence(ExperimentConfig(n_samples=samples, loss=loss, seed=0))
    s = result.summary()
    print(f"{loss}: {s['n_with_itv_above_threshold']} of {s['n_satisfying_criterion']} models meeting "
          f"{s['criterion']} have ITV > 0.01 (fraction {s['fraction']:.3f})")
