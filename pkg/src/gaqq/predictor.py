"""Joint prediction of the quantitative response and the class label.

For a new predictor vector ``x`` each class ``k`` gets a candidate response
``y_k`` (the Gaussian conditional mean of ``y`` given ``x`` in class ``k``) and
a score ``log pi_k + log N((x', y_k)'; mu_k, Sigma)``. The label is the arg-max
of the scores and the predicted response is the candidate of that class.
Ties go to the smallest class index. All comparisons happen in log space.
"""
from dataclasses import dataclass
import math

import numpy as np

from .estimator import Dataset, ModelParams
from .exceptions import InvalidInput
from .numerics import pinv_sym

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Prediction:
    y_hat: float
    z_hat: int
    per_class_y: np.ndarray
    per_class_score: np.ndarray


@dataclass
class Predictions:
    y_hat: np.ndarray
    z_hat: np.ndarray
    per_class_y: np.ndarray
    per_class_score: np.ndarray

    def __len__(self):
        return self.y_hat.shape[0]

    def __getitem__(self, i) -> Prediction:
        return Prediction(float(self.y_hat[i]), int(self.z_hat[i]),
                          self.per_class_y[i], self.per_class_score[i])


def _as_x(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.p - 1:
        raise InvalidInput(f"expected {model.p - 1} predictors, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("predictors contain non-finite values")
    return x


def _check_class(model, k):
    if not 1 <= k <= model.k_classes:
        raise InvalidInput(f"class {k} outside 1..{model.k_classes}")


def _candidates(model: ModelParams, xs: np.ndarray) -> np.ndarray:
    """(n, K) conditional-mean candidates."""
    coef = model.regression_coef
    # mu_ky + coef'(x - mu_kX) for every row and class
    return (model.mu_y - model.mu_x @ coef)[None, :] + (xs @ coef)[:, None]


def _scores(model: ModelParams, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    n, K = ys.shape
    out = np.empty((n, K))
    log_pi = np.log(model.pi)
    if model.kind == "glda":
        # marginal density of x under the pseudo-inverse; y_k adds nothing that
        # depends on k
        prec = model.sigma_x_pinv
        rank = np.linalg.matrix_rank(prec, hermitian=True)
        logpdet = model.meta.get("sigma_x_logpdet")
        if logpdet is None:
            logpdet = pinv_sym(model.sigma_x)[1]
        const = -0.5 * (rank * _LOG_2PI + logpdet)
        for k in range(K):
            r = xs - model.mu_x[k]
            out[:, k] = log_pi[k] + const - 0.5 * np.sum((r @ prec) * r, axis=1)
        return out
    const = -0.5 * (model.p * _LOG_2PI - model.log_det_c)
    for k in range(K):
        r = np.column_stack([xs, ys[:, k]]) - model.mu[k]
        out[:, k] = log_pi[k] + const - 0.5 * np.sum((r @ model.c_hat) * r, axis=1)
    return out


def predict_quantitative(model: ModelParams, x, k: int) -> float:
    """Conditional mean of the response given ``x`` in class ``k``."""
    x = _as_x(model, x)
    _check_class(model, k)
    return float(model.mu_y[k - 1] + model.regression_coef @ (x - model.mu_x[k - 1]))


def log_class_score(model: ModelParams, x, k: int) -> float:
    """``log pi_k + log p_k`` with ``p_k`` the class-``k`` density at ``(x', y_k)'``."""
    x = _as_x(model, x).reshape(1, -1)
    _check_class(model, k)
    ys = _candidates(model, x)
    return float(_scores(model, x, ys)[0, k - 1])


def lda_score(model: ModelParams, w, k: int) -> float:
    """Linear discriminant of class ``k`` against the baseline class 1 at ``w``.

    ``log(pi_k / pi_1) + K (w - (mu_1 + mu_k) / 2)' C delta_k``; zero for ``k = 1``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (model.p,):
        raise InvalidInput(f"expected a vector of length {model.p}")
    _check_class(model, k)
    if k == 1:
        return 0.0
    prior = math.log(model.pi[k - 1] / model.pi[0])
    if model.kind == "glda":
        mid = w[:-1] - 0.5 * (model.mu_x[0] + model.mu_x[k - 1])
        return prior + float(mid @ model.sigma_x_pinv @ (model.mu_x[k - 1] - model.mu_x[0]))
    K = model.k_classes
    mid = w - 0.5 * (model.mu[0] + model.mu[k - 1])
    return prior + K * float(mid @ model.c_hat @ model.delta[k - 2])


def predict_batch(model: ModelParams, xs) -> Predictions:
    xs = _as_x(model, xs)
    if xs.ndim == 1:
        xs = xs.reshape(1, -1)
    if xs.shape[0] == 0:
        K = model.k_classes
        return Predictions(np.empty(0), np.empty(0, dtype=np.int64),
                           np.empty((0, K)), np.empty((0, K)))
    ys = _candidates(model, xs)
    scores = _scores(model, xs, ys)
    best = np.argmax(scores, axis=1)  # first maximum -> smallest class index
    y_hat = ys[np.arange(xs.shape[0]), best]
    return Predictions(y_hat, best + 1, ys, scores)


def predict(model: ModelParams, x) -> Prediction:
    x = _as_x(model, x)
    if x.ndim != 1:
        raise InvalidInput("predict takes a single predictor vector; use predict_batch")
    return predict_batch(model, x.reshape(1, -1))[0]


def predict_via_lda(model: ModelParams, x):
    """Predict the response first, then classify ``(x', y_hat)'`` by the linear rule.

    Returns ``(y_hat, z_hat)``; agrees with :func:`predict` away from exact ties.
    """
    pred = predict(model, x)
    w = np.append(np.asarray(x, float), pred.y_hat)
    lda = [lda_score(model, w, k) for k in range(1, model.k_classes + 1)]
    return pred.y_hat, int(np.argmax(lda)) + 1


def marginal_precision_x(model: ModelParams) -> np.ndarray:
    """Inverse covariance of the predictors alone (Schur complement of ``C``)."""
    if model.sigma_x_pinv is not None:
        return model.sigma_x_pinv
    return model.c_x - np.outer(model.c_xy, model.c_xy) / model.c_y2


def marginal_lda_decision(model: ModelParams, x) -> int:
    """Classify from ``x`` alone with the marginal Gaussian discriminant."""
    x = _as_x(model, x)
    prec = marginal_precision_x(model)
    r = x[None, :] - model.mu_x
    scores = np.log(model.pi) - 0.5 * np.sum((r @ prec) * r, axis=1)
    return int(np.argmax(scores)) + 1


def marginal_lda_statistic(model: ModelParams, x) -> float:
    """Two-class log-odds of class 1 versus class 2 computed from ``x`` alone."""
    if model.k_classes != 2:
        raise InvalidInput("the marginal statistic is defined for two classes")
    x = _as_x(model, x)
    prec = marginal_precision_x(model)
    diff = model.mu_x[0] - model.mu_x[1]
    mid = 0.5 * (model.mu_x[0] + model.mu_x[1])
    return float(math.log(model.pi[0] / model.pi[1]) - mid @ prec @ diff + x @ prec @ diff)


def glda_baseline(train: Dataset, rcond: float = 1e-10) -> ModelParams:
    """Pooled-covariance discriminant using generalised inverses.

    Class means are the sample means, the covariance is the pooled within-class
    sample covariance and the precision is its Moore-Penrose inverse
    (eigenvalues below ``rcond * lambda_max`` dropped). Classification uses the
    predictors only, through the pseudo-inverse of their covariance block.
    """
    n, K = train.n, train.k_classes
    sigma = train.within_scatter() / (n - K)
    sigma = 0.5 * (sigma + sigma.T)
    c_hat, _ = pinv_sym(sigma, rcond)
    sx_pinv, logpdet = pinv_sym(sigma[:-1, :-1], rcond)
    mu = train.class_means.copy()
    return ModelParams(mu=mu, c_hat=c_hat, sigma_hat=sigma, pi=train.n_k / n,
                       delta=(mu[1:] - mu[0]) / K, kind="glda",
                       meta={"sigma_x_logpdet": logpdet}, sigma_x_pinv=sx_pinv)
