"""Fit the joint model at fixed penalties and look at what comes out.

Run with ``python demos/01_two_class_fit.py``. Takes a few seconds.
"""
# %%
import math

import numpy as np

from gaqq import Hyperparams, fit, predict_batch
from gaqq.estimator import count_nonzero
from gaqq.simulation import ScenarioSpec, replication_rng, simulate

# %% [markdown]
# A two-class design with p = 20 variables (19 predictors plus the response in
# the last column). The true precision matrix couples only the first five
# variables, and only a few means differ between the classes.

# %%
spec = ScenarioSpec("M4", p=20, sizes=(30, 30), sparsity="S1", seed=7)
train, (test_w, test_z), truth = simulate(spec, replication_rng(spec.seed, 0, spec.scenario_id))
print("training rows", train.n, "variables", train.p, "class sizes", train.n_k)

# %%
base = math.sqrt(math.log(train.p) / train.n) * train.n
model, trace = fit(train, Hyperparams(lambda1=0.5 * base, lambda2=1.0 * base))
print("outer iterations", trace.iterations, "converged", trace.converged)
print("objective per sweep", np.round(trace.objective, 3))

# %%
# sparsity of the estimated precision (upper triangle) and mean difference
iu = np.triu_indices(train.p, 1)
print("nonzero off-diagonal precision entries", count_nonzero(model.c_hat[iu]), "of", iu[0].size)
print("true nonzero off-diagonal entries     ", count_nonzero(truth["precision"][iu]))
print("nonzero mean-difference entries       ", count_nonzero(model.delta[0]), "of", train.p)

# %%
# predict label and response from the predictors alone
pred = predict_batch(model, test_w[:, :-1])
me = np.mean(pred.z_hat != test_z)
rmspe = np.sqrt(np.mean((pred.y_hat - test_w[:, -1]) ** 2))
print(f"test misclassification {100 * me:.1f}%  response RMSPE {rmspe:.3f}")
