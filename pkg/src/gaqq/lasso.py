"""Cyclic coordinate-descent lasso.

Two entry points share the same soft-threshold update:

* :func:`solve_lasso` minimises ``||r - A b||^2 + lam * |b|_1`` using residual
  updates (``O(mq)`` per sweep).
* :func:`solve_lasso_gram` minimises ``0.5 b'Qb - c'b + lam * |b|_1`` given the
  Gram matrix directly; the graphical lasso column updates use this form.
"""
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import InvalidInput


@dataclass
class LassoSolution:
    beta: np.ndarray
    iterations: int
    converged: bool
    objective: float
    history: np.ndarray = field(default=None, repr=False)


def soft_threshold(z: float, gamma: float) -> float:
    if gamma < 0:
        raise InvalidInput("threshold must be non-negative")
    return _soft(float(z), float(gamma))


@numba.njit(cache=True)
def _soft(z, gamma):
    # ties |z| == gamma go to zero
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@numba.njit(cache=True)
def _residual_objective(resid, beta, lam):
    return np.dot(resid, resid) + lam * np.sum(np.abs(beta))


@numba.njit(cache=True)
def _cd_residual(A, r, lam, beta, tol, max_iter, track):
    m, q = A.shape
    norms = np.empty(q)
    for j in range(q):
        norms[j] = np.dot(A[:, j], A[:, j])
    resid = r - A @ beta
    history = np.empty(max_iter + 1 if track else 1)
    history[0] = _residual_objective(resid, beta, lam)
    half = 0.5 * lam
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        max_change = 0.0
        for j in range(q):
            old = beta[j]
            if norms[j] == 0.0:
                new = 0.0
            else:
                z = np.dot(A[:, j], resid) + norms[j] * old
                new = _soft(z, half) / norms[j]
            if new != old:
                diff = new - old
                for i in range(m):
                    resid[i] -= diff * A[i, j]
                beta[j] = new
                if abs(diff) > max_change:
                    max_change = abs(diff)
        if track:
            history[it] = _residual_objective(resid, beta, lam)
        if max_change <= tol:
            converged = True
            break
    return beta, it, converged, history[: it + 1] if track else history


@numba.njit(cache=True)
def _cd_gram(Q, c, lam, beta, tol, max_iter):
    q = Q.shape[0]
    grad = Q @ beta  # running Q b
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        max_change = 0.0
        for j in range(q):
            qjj = Q[j, j]
            old = beta[j]
            if qjj <= 0.0:
                new = 0.0
            else:
                z = c[j] - grad[j] + qjj * old
                new = _soft(z, lam) / qjj
            if new != old:
                diff = new - old
                for i in range(q):
                    grad[i] += diff * Q[i, j]
                beta[j] = new
                if abs(diff) > max_change:
                    max_change = abs(diff)
        if max_change <= tol:
            converged = True
            break
    return beta, it, converged


def lasso_objective(design, response, penalty, beta) -> float:
    resid = np.asarray(response, float) - np.asarray(design, float) @ beta
    return float(resid @ resid + penalty * np.sum(np.abs(beta)))


def solve_lasso(design, response, penalty, warm_start=None, tol=1e-8,
                max_iter=10000, track_objective=False) -> LassoSolution:
    """Minimise ``||response - design @ beta||^2 + penalty * |beta|_1``.

    Parameters
    ----------
    design : (m, q) array
    response : (m,) array
    penalty : float
        Non-negative l1 weight. Note the squared loss carries no 1/2 factor,
        so each coordinate is soft-thresholded at ``penalty / 2``.
    warm_start : (q,) array, optional
    tol : float
        Stop once the largest coordinate change of a full sweep is ``<= tol``.
    max_iter : int
        Maximum number of sweeps; hitting it returns ``converged=False``.
    track_objective : bool
        Record the objective after every sweep in ``history``.
    """
    A = np.ascontiguousarray(design, dtype=float)
    r = np.ascontiguousarray(response, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] != r.shape[0]:
        raise InvalidInput(f"design {A.shape} and response {r.shape} do not agree")
    if penalty < 0 or tol <= 0 or max_iter < 1:
        raise InvalidInput("penalty must be >= 0, tol > 0 and max_iter >= 1")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(r))):
        raise InvalidInput("non-finite values in lasso problem")
    q = A.shape[1]
    if warm_start is None:
        beta = np.zeros(q)
    else:
        beta = np.array(warm_start, dtype=float).ravel()
        if beta.shape[0] != q:
            raise InvalidInput("warm start has the wrong length")
    beta, it, conv, hist = _cd_residual(A, r, float(penalty), beta, float(tol),
                                        int(max_iter), bool(track_objective))
    return LassoSolution(beta, int(it), bool(conv), lasso_objective(A, r, penalty, beta),
                         hist if track_objective else None)


def solve_lasso_gram(gram, linear, penalty, warm_start=None, tol=1e-8, max_iter=10000):
    """Minimise ``0.5 b' gram b - linear' b + penalty * |b|_1``.

    Returns ``(beta, sweeps, converged)``.
    """
    Q = np.ascontiguousarray(gram, dtype=float)
    c = np.ascontiguousarray(linear, dtype=float).ravel()
    beta = np.zeros(c.shape[0]) if warm_start is None else np.array(warm_start, float).ravel()
    beta, it, conv = _cd_gram(Q, c, float(penalty), beta, float(tol), int(max_iter))
    return beta, int(it), bool(conv)


def lasso_kkt_residual(design, response, penalty, beta) -> float:
    """Largest violation of the lasso optimality conditions at ``beta``."""
    A = np.asarray(design, float)
    grad = 2.0 * A.T @ (A @ beta - np.asarray(response, float))
    nz = beta != 0
    viol = np.empty_like(grad)
    viol[nz] = np.abs(grad[nz] + penalty * np.sign(beta[nz]))
    viol[~nz] = np.maximum(np.abs(grad[~nz]) - penalty, 0.0)
    return float(viol.max()) if viol.size else 0.0
