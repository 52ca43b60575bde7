"""Choose both penalties by BIC and compare with the pseudo-inverse discriminant.

Run with ``python demos/02_bic_tuning.py``. Takes under a minute.
"""
# %%
import numpy as np

from gaqq import glda_baseline, predict_batch, tune
from gaqq.simulation import ScenarioSpec, misclassification_error, replication_rng, rmspe, simulate

# %%
# more variables than training rows, so the sample covariance is singular
spec = ScenarioSpec("M1", p=40, sizes=(15, 15), sparsity="S2", seed=3)
train, (test_w, test_z), _ = simulate(spec, replication_rng(spec.seed, 0, spec.scenario_id))

# %%
# default grid: multipliers of sqrt(log p / n) * n for each penalty
res = tune(train)
best = res.model
print(f"chosen lambda1={best.lambda1:.3g} lambda2={best.lambda2:.3g} bic={best.meta['bic']:.1f}")
print("failed grid pairs:", len(res.failures))

# %%
# a slice of the BIC surface at the chosen lambda1
for l1, l2, score in res.table:
    if l1 == best.lambda1:
        print(f"  lambda2={l2:10.3f}  bic={score:10.2f}")

# %%
x_test, y_test = test_w[:, :-1], test_w[:, -1]
for name, model in (("joint model", best), ("pseudo-inverse LDA", glda_baseline(train))):
    pred = predict_batch(model, x_test)
    print(f"{name:>20}: ME {100 * misclassification_error(test_z, pred.z_hat):5.1f}%  "
          f"RMSPE {rmspe(y_test, pred.y_hat):.3f}")
