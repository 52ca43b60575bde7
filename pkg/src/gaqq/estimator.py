"""Penalised joint-Gaussian estimation for a quantitative and a qualitative response.

Each sample is a vector ``w = (x', y)'`` (response last) with a class label
``z`` in ``1..K``. Classes share one covariance; the estimator alternates a
graphical-lasso solve for the precision matrix ``C`` with lasso solves for the
mean-difference vectors, profiling the overall location out in closed form.

Mean-difference conventions
---------------------------
Two-class code works with ``delta2 = (mu_1 - mu_2) / 2``. The multi-class code
(and :class:`ModelParams`) uses ``K * delta_k = mu_k - mu_1`` for
``k = 2..K``; for ``K = 2`` this is ``-delta2``.

Penalty scaling
---------------
For fixed ``C`` the scatter term of the objective equals
``a_k * ||y_tilde - C^{1/2} delta_k||^2`` plus a constant, with
``a_k = K^2 n_k (n - n_k) / n`` (``4 n1 n2 / n`` for two classes). The inner
lasso is therefore solved with penalty ``lambda2 / a_k`` so that every block
update minimises the full penalised objective and the outer objective never
increases.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
import logging
import math

import numpy as np

from .exceptions import InvalidInput, TuningFailed
from .glasso import glasso_objective, solve_glasso
from .lasso import solve_lasso
from .numerics import as_sym, log_det_spd, sqrt_spd

logger = logging.getLogger(__name__)

NONZERO_THRESHOLD = 1e-8
GRID_MULTIPLIERS = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0)


class Dataset:
    """Labelled samples ``w`` (n x p, response in the last column) with labels 1..K.

    ``label_mapping`` (original label -> class index) and ``column_names`` are
    optional provenance filled in by the CSV loader.
    """

    def __init__(self, w, z, label_mapping=None, column_names=None):
        w = np.array(w, dtype=float)
        z = np.asarray(z)
        if w.ndim != 2 or w.shape[0] != z.shape[0]:
            raise InvalidInput(f"w has shape {w.shape} but there are {z.shape[0]} labels")
        if w.shape[1] < 2:
            raise InvalidInput("need at least one predictor plus the response")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("data contain non-finite values")
        if z.size and not np.all(np.equal(np.mod(z, 1), 0)):
            raise InvalidInput("labels must be integers")
        z = z.astype(np.int64)
        labels = np.unique(z)
        k = labels.size
        if k < 2 or labels[0] != 1 or labels[-1] != k:
            raise InvalidInput(f"labels must cover 1..K contiguously with K >= 2, got {labels}")
        counts = np.bincount(z, minlength=k + 1)[1:]
        if np.any(counts < 2):
            raise InvalidInput(f"every class needs at least two samples, got counts {counts}")
        self.w = w
        self.z = z
        self.n_k = counts
        self.w.setflags(write=False)
        self.label_mapping = dict(label_mapping) if label_mapping else None
        self.column_names = list(column_names) if column_names else None

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def p(self) -> int:
        return self.w.shape[1]

    @property
    def k_classes(self) -> int:
        return self.n_k.size

    @property
    def x(self):
        return self.w[:, :-1]

    @property
    def y(self):
        return self.w[:, -1]

    @cached_property
    def class_means(self) -> np.ndarray:
        return np.stack([self.w[self.z == k].mean(axis=0) for k in range(1, self.k_classes + 1)])

    @cached_property
    def mean(self) -> np.ndarray:
        return self.w.mean(axis=0)

    def within_scatter(self) -> np.ndarray:
        centred = self.w - self.class_means[self.z - 1]
        return centred.T @ centred


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.0
    lambda2: float = 0.0
    tau1: float = 1e-6
    tau2: float = 1e-6
    max_outer: int = 100
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 500
    lasso_tol: float = 1e-8
    lasso_max_iter: int = 10000

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInput("penalties must be non-negative")
        for name in ("tau1", "tau2", "glasso_tol", "lasso_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if self.max_outer < 1 or self.glasso_max_iter < 1 or self.lasso_max_iter < 1:
            raise InvalidInput("iteration caps must be positive")


@dataclass
class FitTrace:
    objective: list = field(default_factory=list)
    c_change: list = field(default_factory=list)
    delta_change: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


@dataclass
class ModelParams:
    """Fitted class means, shared precision/covariance and class priors.

    ``delta`` holds ``(mu_k - mu_1) / K`` for ``k = 2..K`` as rows. ``kind`` is
    ``"gaqq"`` for penalised fits and ``"glda"`` for the pseudo-inverse baseline;
    the baseline also carries ``sigma_x_pinv``, the generalised inverse of the
    predictor covariance, which replaces the precision identity in prediction.
    """

    mu: np.ndarray
    c_hat: np.ndarray
    sigma_hat: np.ndarray
    pi: np.ndarray
    delta: np.ndarray
    lambda1: float = 0.0
    lambda2: float = 0.0
    kind: str = "gaqq"
    meta: dict = field(default_factory=dict)
    sigma_x_pinv: np.ndarray = field(default=None, repr=False)

    @property
    def k_classes(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return self.mu.shape[1]

    @property
    def delta2(self) -> np.ndarray:
        """Two-class mean difference ``(mu_1 - mu_2) / 2``."""
        return (self.mu[0] - self.mu[1]) / 2.0

    # block views; the response is the last coordinate
    @property
    def mu_x(self):
        return self.mu[:, :-1]

    @property
    def mu_y(self):
        return self.mu[:, -1]

    @property
    def c_x(self):
        return self.c_hat[:-1, :-1]

    @property
    def c_xy(self):
        return self.c_hat[:-1, -1]

    @property
    def c_y2(self) -> float:
        return float(self.c_hat[-1, -1])

    @property
    def sigma_x(self):
        return self.sigma_hat[:-1, :-1]

    @property
    def sigma_xy(self):
        return self.sigma_hat[:-1, -1]

    @property
    def sigma_y2(self) -> float:
        return float(self.sigma_hat[-1, -1])

    @cached_property
    def regression_coef(self) -> np.ndarray:
        """Row vector ``Sigma_Xy' Sigma_X^{-1}`` used for conditional-mean prediction."""
        if self.sigma_x_pinv is not None:
            return self.sigma_x_pinv @ self.sigma_xy
        return -self.c_xy / self.c_y2

    @cached_property
    def log_det_c(self) -> float:
        return log_det_spd(self.c_hat)


# ---------------------------------------------------------------------------
# working scatter and working responses


def _check_vec(v, p, what):
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != p:
        raise InvalidInput(f"{what} has length {v.shape[0]}, expected {p}")
    return v


def build_s_tilde_two_class(data: Dataset, delta2) -> np.ndarray:
    if data.k_classes != 2:
        raise InvalidInput("two-class scatter needs exactly two classes")
    delta2 = _check_vec(delta2, data.p, "delta2")
    n1, n2 = data.n_k
    n = data.n
    shift = np.where((data.z == 1)[:, None], -(2.0 * n2 / n) * delta2, (2.0 * n1 / n) * delta2)
    r = data.w + shift - data.mean
    return as_sym(r.T @ r)


def build_y_tilde_two_class(data: Dataset, c_sqrt) -> np.ndarray:
    if data.k_classes != 2:
        raise InvalidInput("two-class working response needs exactly two classes")
    c_sqrt = np.asarray(c_sqrt, float)
    if c_sqrt.shape != (data.p, data.p):
        raise InvalidInput("square root has the wrong shape")
    n1, n2 = data.n_k
    s1 = data.w[data.z == 1].sum(axis=0)
    s2 = data.w[data.z == 2].sum(axis=0)
    return c_sqrt @ (n2 * s1 - n1 * s2) / (2.0 * n1 * n2)


def _deltas_array(data, deltas):
    d = np.asarray(deltas, dtype=float)
    if d.ndim == 1:
        d = d.reshape(1, -1)
    if d.shape != (data.k_classes - 1, data.p):
        raise InvalidInput(f"expected {data.k_classes - 1} deltas of length {data.p}, got {d.shape}")
    return d


def build_s_tilde_multi(data: Dataset, deltas) -> np.ndarray:
    """Scatter about the profiled class means; ``deltas`` rows are delta_2..delta_K."""
    d = _deltas_array(data, deltas)
    K = data.k_classes
    full = np.vstack([np.zeros(data.p), d])  # delta_1 = 0
    common = (K / data.n) * (data.n_k[1:, None] * d).sum(axis=0)
    r = data.w - data.mean + common - K * full[data.z - 1]
    return as_sym(r.T @ r)


def build_y_tilde_multi(data: Dataset, k: int, c_sqrt, deltas) -> np.ndarray:
    """Working response for the lasso in ``delta_k`` (``2 <= k <= K``).

    ``deltas`` holds all K-1 vectors; the entry for ``k`` itself is ignored.
    Returns ``C^{1/2} M / (K n_k (n - n_k))`` with
    ``M = (n - n_k) sum_{G_k} w - n_k sum_{not G_k} w + K n_k sum_{g != k} n_g delta_g``.
    """
    K = data.k_classes
    if not 2 <= k <= K:
        raise InvalidInput(f"class index {k} outside 2..{K}")
    d = _deltas_array(data, deltas)
    c_sqrt = np.asarray(c_sqrt, float)
    if c_sqrt.shape != (data.p, data.p):
        raise InvalidInput("square root has the wrong shape")
    n, nk = data.n, data.n_k[k - 1]
    in_k = data.z == k
    others = np.arange(2, K + 1) != k
    m = ((n - nk) * data.w[in_k].sum(axis=0) - nk * data.w[~in_k].sum(axis=0)
         + K * nk * (data.n_k[1:][others, None] * d[others]).sum(axis=0))
    return c_sqrt @ m / (K * nk * (n - nk))


def lasso_scale(data: Dataset, k: int) -> float:
    """Factor ``K^2 n_k (n - n_k) / n`` multiplying the working least-squares term."""
    K, n, nk = data.k_classes, data.n, data.n_k[k - 1]
    return K * K * nk * (n - nk) / n


# ---------------------------------------------------------------------------
# objectives


def objective_two_class(data: Dataset, c, delta2, lambda1, lambda2) -> float:
    """Profiled two-class objective in ``(delta2, C)``."""
    s = build_s_tilde_two_class(data, delta2)
    return glasso_objective(c, s, data.n, lambda1) + lambda2 * float(np.abs(delta2).sum())


def objective_multi(data: Dataset, c, deltas, lambda1, lambda2) -> float:
    d = _deltas_array(data, deltas)
    s = build_s_tilde_multi(data, d)
    return glasso_objective(c, s, data.n, lambda1) + lambda2 * float(np.abs(d).sum())


def objective_means(data: Dataset, mus, c, lambda1, lambda2) -> float:
    """Penalised negative log-likelihood written in the class means.

    The mean penalty is ``(lambda2 / K) sum_k |mu_k - mu_1|_1``, i.e.
    ``lambda2 sum_k |delta_k|_1``; for two classes it is
    ``lambda2 / 2 * |mu_1 - mu_2|_1``.
    """
    mus = np.asarray(mus, float)
    c = np.asarray(c, float)
    K = mus.shape[0]
    r = data.w - mus[data.z - 1]
    quad = float(np.sum((r @ c) * r))
    off = np.abs(c).sum() - np.abs(np.diag(c)).sum()
    pen = (lambda2 / K) * float(np.abs(mus[1:] - mus[0]).sum())
    return -data.n * log_det_spd(c) + quad + lambda1 * off + pen


# ---------------------------------------------------------------------------
# fitting


def _profiled_means(data: Dataset, d: np.ndarray) -> np.ndarray:
    K = data.k_classes
    common = data.mean - (K / data.n) * (data.n_k[1:, None] * d).sum(axis=0)
    full = np.vstack([np.zeros(data.p), d])
    return common + K * full


def _model(data, mu, c, sigma, d, hp, trace):
    pi = data.n_k / data.n
    return ModelParams(mu=mu, c_hat=c, sigma_hat=sigma, pi=pi, delta=d,
                       lambda1=hp.lambda1, lambda2=hp.lambda2,
                       meta={"iterations": trace.iterations, "converged": trace.converged})


def fit_two_class(data: Dataset, hp: Hyperparams):
    """Alternate graphical-lasso and lasso solves for two classes.

    Starts from ``delta2 = (wbar_1 - wbar_2) / 2`` and stops when the squared
    Frobenius change of ``C`` is below ``tau1`` and the squared l2 change of
    ``delta2`` is below ``tau2``.

    Returns
    -------
    (ModelParams, FitTrace)
    """
    if data.k_classes != 2:
        raise InvalidInput("fit_two_class needs exactly two classes")
    n1, n2 = data.n_k
    n = data.n
    lam_eff = hp.lambda2 / lasso_scale(data, 2)
    delta = (data.class_means[0] - data.class_means[1]) / 2.0
    c = None
    trace = FitTrace()
    for t in range(1, hp.max_outer + 1):
        s = build_s_tilde_two_class(data, delta)
        gl = solve_glasso(s, n, hp.lambda1, tol=hp.glasso_tol, max_iter=hp.glasso_max_iter,
                          warm_start=c)
        c_new, sigma = gl.c_hat, gl.sigma_hat
        c_sqrt = sqrt_spd(c_new)
        y_tilde = build_y_tilde_two_class(data, c_sqrt)
        las = solve_lasso(c_sqrt, y_tilde, lam_eff, warm_start=delta,
                          tol=hp.lasso_tol, max_iter=hp.lasso_max_iter)
        dc = np.inf if c is None else float(np.sum((c_new - c) ** 2))
        dd = float(np.sum((las.beta - delta) ** 2))
        c, delta = c_new, las.beta
        trace.objective.append(objective_two_class(data, c, delta, hp.lambda1, hp.lambda2))
        trace.c_change.append(dc)
        trace.delta_change.append(dd)
        trace.iterations = t
        if dc < hp.tau1 and dd < hp.tau2:
            trace.converged = True
            break
    if not trace.converged:
        logger.warning("two-class fit stopped at max_outer=%d without converging", hp.max_outer)
    gamma = data.mean + ((n2 - n1) / n) * delta
    mu = np.vstack([gamma + delta, gamma - delta])
    return _model(data, mu, c, sigma, -delta.reshape(1, -1), hp, trace), trace


def fit_multi_class(data: Dataset, hp: Hyperparams):
    """Multi-class fit: one graphical-lasso solve then K-1 lasso solves per sweep.

    The lasso blocks are visited in order ``k = 2..K``, each using the latest
    values of the other mean differences. Starts from
    ``delta_k = (wbar_k - wbar_1) / K``.
    """
    K = data.k_classes
    n = data.n
    d = (data.class_means[1:] - data.class_means[0]) / K
    c = None
    trace = FitTrace()
    for t in range(1, hp.max_outer + 1):
        s = build_s_tilde_multi(data, d)
        gl = solve_glasso(s, n, hp.lambda1, tol=hp.glasso_tol, max_iter=hp.glasso_max_iter,
                          warm_start=c)
        c_new, sigma = gl.c_hat, gl.sigma_hat
        c_sqrt = sqrt_spd(c_new)
        d_old = d.copy()
        for k in range(2, K + 1):
            y_tilde = build_y_tilde_multi(data, k, c_sqrt, d)
            las = solve_lasso(c_sqrt, y_tilde, hp.lambda2 / lasso_scale(data, k),
                              warm_start=d[k - 2], tol=hp.lasso_tol, max_iter=hp.lasso_max_iter)
            d[k - 2] = las.beta
        dc = np.inf if c is None else float(np.sum((c_new - c) ** 2))
        dd = float(np.sum((d - d_old) ** 2))
        c = c_new
        trace.objective.append(objective_multi(data, c, d, hp.lambda1, hp.lambda2))
        trace.c_change.append(dc)
        trace.delta_change.append(dd)
        trace.iterations = t
        if dc < hp.tau1 and dd < hp.tau2:
            trace.converged = True
            break
    if not trace.converged:
        logger.warning("multi-class fit stopped at max_outer=%d without converging", hp.max_outer)
    mu = _profiled_means(data, d)
    return _model(data, mu, c, sigma, d.copy(), hp, trace), trace


def fit(data: Dataset, hp: Hyperparams):
    """Dispatch to the two-class or multi-class fit by the number of classes."""
    if data.k_classes == 2:
        return fit_two_class(data, hp)
    return fit_multi_class(data, hp)


# ---------------------------------------------------------------------------
# model selection


def count_nonzero(values, threshold: float = NONZERO_THRESHOLD) -> int:
    return int(np.count_nonzero(np.abs(np.asarray(values, float)) > threshold))


def bic(model: ModelParams, data: Dataset) -> float:
    """``-n log|C| + tr(C S) + (v(delta) + v(C) + K - 1) log n`` at the fitted deltas.

    ``v(C)`` counts every nonzero entry of the symmetric matrix, diagonal included.
    """
    if model.p != data.p or model.k_classes != data.k_classes:
        raise InvalidInput("model and data dimensions differ")
    s = build_s_tilde_multi(data, model.delta)
    n = data.n
    fit_term = -n * log_det_spd(model.c_hat) + float(np.sum(model.c_hat * s))
    df = count_nonzero(model.delta) + count_nonzero(model.c_hat) + data.k_classes - 1
    return fit_term + df * math.log(n)


def default_grid(data: Dataset) -> np.ndarray:
    base = math.sqrt(math.log(data.p) / data.n) * data.n
    return np.array(GRID_MULTIPLIERS) * base


@dataclass
class TuneResult:
    model: ModelParams
    trace: FitTrace
    table: list  # (lambda1, lambda2, bic) rows; bic is nan for failed pairs
    failures: dict


def tune(data: Dataset, lambda1_grid=None, lambda2_grid=None, hp: Hyperparams = None,
         threads: int = 1) -> TuneResult:
    """Fit every grid pair and keep the one with the smallest BIC.

    Ties go to the lexicographically larger ``(lambda1, lambda2)`` pair.
    """
    hp = hp or Hyperparams()
    g1 = default_grid(data) if lambda1_grid is None else np.asarray(lambda1_grid, float)
    g2 = default_grid(data) if lambda2_grid is None else np.asarray(lambda2_grid, float)
    if g1.size == 0 or g2.size == 0:
        raise InvalidInput("tuning grids must be non-empty")
    pairs = [(float(a), float(b)) for a in g1 for b in g2]

    def run(pair):
        try:
            model, trace = fit(data, replace(hp, lambda1=pair[0], lambda2=pair[1]))
            score = bic(model, data)
            if not np.isfinite(score):
                raise InvalidInput("non-finite BIC")
            return model, trace, score, None
        except Exception as exc:  # recorded per pair, re-raised only if all fail
            return None, None, math.nan, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(pair) for pair in pairs]

    table, failures = [], {}
    best = None
    for pair, (model, trace, score, err) in zip(pairs, results):
        table.append((pair[0], pair[1], score))
        if err is not None:
            failures[pair] = err
            continue
        key = (score, -pair[0], -pair[1])
        if best is None or key < best[0]:
            best = (key, model, trace)
    if best is None:
        raise TuningFailed("every tuning pair failed", failures)
    model = best[1]
    model.meta["bic"] = best[0][0]
    return TuneResult(model, best[2], table, failures)
