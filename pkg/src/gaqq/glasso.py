"""Graphical lasso with an unpenalised diagonal.

Solves ``min_C  -n log|C| + tr(C S) + lambda1 * sum_{i != j} |c_ij|`` where
``S`` is a scatter matrix (a sum over ``n`` samples, not an average).

Internally the equivalent normalised problem
``-log|C| + tr(C S/n) + (lambda1/n) ||C||_1`` is solved. Two solvers are
available and both keep every iterate positive definite with a non-increasing
objective:

``"newton"`` (default)
    Proximal Newton iterations. On the free set (entries that are nonzero or
    violate the zero-subgradient condition) the penalised quadratic model of
    the objective is minimised in two stages: a smooth Newton step for the
    current sign pattern by conjugate gradients preconditioned with
    ``X (x) X`` (the inverse of the Hessian ``W (x) W``), then coordinate
    descent on the exact penalised model started from that step, which fixes
    entries whose sign should change. An Armijo backtracking line search
    accepts a step only when the Cholesky factorisation succeeds and the
    objective decreases sufficiently. Copes well with a singular ``S`` and a
    small penalty, where column-wise coordinate descent crawls.
``"bcd"``
    Block coordinate descent over columns of the precision matrix. Each column
    update minimises the objective exactly in that row/column (a Gram-form
    lasso on the inverse of the leading block). The covariance ``W = C^{-1}``
    is carried along with rank-one updates and refreshed periodically. Simple
    and robust but slow for ill-conditioned problems.
"""
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import InvalidInput
from .lasso import _cd_gram
from .numerics import as_sym, inv_spd, log_det_spd

_REFRESH_EVERY = 10
_MODEL_SWEEPS = 20


@dataclass
class GlassoSolution:
    c_hat: np.ndarray
    sigma_hat: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def glasso_objective(c, s_tilde, n, lambda1) -> float:
    c = np.asarray(c, float)
    off = np.abs(c).sum() - np.abs(np.diag(c)).sum()
    return float(-n * log_det_spd(c) + np.sum(c * s_tilde) + lambda1 * off)


def _kkt(c, sigma, s_tilde, n, lambda1):
    grad = -n * sigma + s_tilde
    viol = np.abs(grad + lambda1 * np.sign(c))
    zero = c == 0
    viol[zero] = np.maximum(np.abs(grad[zero]) - lambda1, 0.0)
    np.fill_diagonal(viol, np.abs(np.diag(grad)))
    return float(viol.max())


def glasso_kkt_residual(c, s_tilde, n, lambda1) -> float:
    """Largest violation of the stationarity conditions at ``c``.

    With ``G = -n C^{-1} + S``: ``|G_ii|`` on the diagonal, ``|G_ij + lambda1
    sign(c_ij)|`` where ``c_ij != 0`` and ``max(|G_ij| - lambda1, 0)`` where
    ``c_ij == 0``. Zero for an exact minimiser.
    """
    c = as_sym(c)
    return _kkt(c, inv_spd(c), as_sym(s_tilde), n, lambda1)


@numba.njit(cache=True)
def _sweep(S, theta, W, rho, inner_tol, inner_max):
    p = S.shape[0]
    m = p - 1
    idx = np.empty(m, dtype=np.int64)
    A = np.empty((m, m))
    Q = np.empty((m, m))
    c = np.empty(m)
    beta = np.empty(m)
    inner_ok = True
    for j in range(p):
        k = 0
        for i in range(p):
            if i != j:
                idx[k] = i
                k += 1
        w22 = W[j, j]
        s22 = S[j, j]
        # A = inverse of the leading block of theta, via the Schur complement of W
        for a in range(m):
            ia = idx[a]
            wa = W[ia, j] / w22
            for b in range(m):
                ib = idx[b]
                A[a, b] = W[ia, ib] - wa * W[ib, j]
                Q[a, b] = s22 * A[a, b]
            c[a] = -S[ia, j]
            beta[a] = theta[ia, j]
        beta, _, ok = _cd_gram(Q, c, rho, beta, inner_tol, inner_max)
        if not ok:
            inner_ok = False
        a_beta = A @ beta
        quad = np.dot(beta, a_beta)
        theta[j, j] = 1.0 / s22 + quad
        W[j, j] = s22
        for a in range(m):
            ia = idx[a]
            theta[ia, j] = beta[a]
            theta[j, ia] = beta[a]
            W[ia, j] = -s22 * a_beta[a]
            W[j, ia] = W[ia, j]
            for b in range(m):
                W[ia, idx[b]] = A[a, b] + s22 * a_beta[a] * a_beta[b]
    return inner_ok


def _pseudo_gradient(x, G, rho):
    """Minimum-norm subgradient of the normalised objective."""
    g = G + rho * np.sign(x)
    zero = x == 0
    g[zero] = np.sign(G[zero]) * np.maximum(np.abs(G[zero]) - rho, 0.0)
    np.fill_diagonal(g, np.diag(G))
    return g


def _pcg(W, X, rhs, mask, rtol, max_iter):
    """Preconditioned CG for ``(W D W) * mask = rhs`` over matrices supported on ``mask``.

    The Hessian of ``-log|X|`` is ``W (x) W`` whose exact inverse is
    ``X (x) X``; restricted to the mask this is an excellent preconditioner,
    so the iteration count barely depends on the conditioning of ``X``.
    """
    d = np.zeros_like(rhs)
    r = rhs.copy()
    z = (X @ r @ X) * mask
    q = z.copy()
    rz = float(np.sum(r * z))
    stop = rtol * float(np.sqrt(np.sum(r * r)))
    for _ in range(max_iter):
        if np.sqrt(np.sum(r * r)) <= stop:
            break
        hq = (W @ q @ W) * mask
        curv = float(np.sum(q * hq))
        if curv <= 0:
            break
        step = rz / curv
        d += step * q
        r -= step * hq
        z = (X @ r @ X) * mask
        rz_new = float(np.sum(r * z))
        q = z + (rz_new / rz) * q
        rz = rz_new
    return d


@numba.njit(cache=True)
def _cd_model(S, X, W, rho, D, mask, sweeps, tol):
    """Coordinate descent on the penalised second-order model around ``X``.

    Minimises ``tr(G D) + 0.5 tr(W D W D) + rho * ||X + D||_off`` over
    symmetric ``D`` supported on ``mask`` (``G = S - W``), starting from the
    given ``D``. ``V = W D`` is maintained so each coordinate costs O(p).
    """
    p = S.shape[0]
    V = W @ D
    for sweep in range(sweeps):
        biggest = 0.0
        for i in range(p):
            for j in range(i, p):
                if not mask[i, j]:
                    continue
                wdw = 0.0
                for k in range(p):
                    wdw += W[i, k] * V[j, k]
                b = S[i, j] - W[i, j] + wdw
                if i == j:
                    mu = -b / (W[i, i] * W[i, i])
                    D[i, i] += mu
                    for k in range(p):
                        V[k, i] += mu * W[k, i]
                else:
                    a = W[i, j] * W[i, j] + W[i, i] * W[j, j]
                    c = X[i, j] + D[i, j]
                    mu = -c + _soft_scalar(c - b / a, rho / a)
                    if mu != 0.0:
                        D[i, j] += mu
                        D[j, i] += mu
                        for k in range(p):
                            V[k, j] += mu * W[k, i]
                            V[k, i] += mu * W[k, j]
                if abs(mu) > biggest:
                    biggest = abs(mu)
        if biggest <= tol:
            return D, sweep + 1
    return D, sweeps


@numba.njit(cache=True)
def _soft_scalar(z, gamma):
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def _off_l1(x):
    return float(np.abs(x).sum() - np.abs(np.diag(x)).sum())


def _chol_objective(x, S, rho):
    """Normalised objective, or ``None`` if ``x`` is not positive definite."""
    try:
        L = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return None
    return -2.0 * float(np.log(np.diag(L)).sum()) + float(np.sum(S * x)) + rho * _off_l1(x)


def _newton_step(S, theta, W, rho, sweeps):
    """Descent direction from the penalised quadratic model, and its predicted decrease."""
    G = S - W
    g = _pseudo_gradient(theta, G, rho)
    mask = (theta != 0) | (np.abs(G) > rho)
    np.fill_diagonal(mask, True)
    # smooth Newton step on the current sign pattern, clipped to that orthant
    gnorm = float(np.sqrt(np.sum(g * g)))
    d = _pcg(W, theta, -g * mask, mask, min(0.1, np.sqrt(gnorm)), 10 * S.shape[0])
    d = 0.5 * (d + d.T)
    orthant = np.where(theta != 0, np.sign(theta), -np.sign(g))
    cross = (np.sign(theta + d) != orthant) & (orthant != 0)
    np.fill_diagonal(cross, False)
    d[cross] = -theta[cross]
    base = _off_l1(theta)

    def model(D):
        return (float(np.sum(G * D)) + 0.5 * float(np.sum((W @ D @ W) * D))
                + rho * (_off_l1(theta + D) - base))

    D, _ = _cd_model(S, theta, W, rho, d, mask, sweeps, 1e-3 * float(np.abs(d).max()))
    if not model(D) < 0:
        D, _ = _cd_model(S, theta, W, rho, np.zeros_like(d), mask, sweeps, 0.0)
    return D, float(np.sum(G * D)) + rho * (_off_l1(theta + D) - base)


def _newton(S_tilde, S, n, lambda1, rho, theta, target, max_iter, history):
    """Proximal Newton iterations; see the module docstring."""
    f = _chol_objective(theta, S, rho)
    if f is None:
        raise InvalidInput("starting precision matrix is not positive definite")
    it = 0
    while it < max_iter:
        W = inv_spd(theta)
        if _kkt(theta, W, S_tilde, n, lambda1) <= target:
            return theta, W, it, True
        it += 1
        D, decrease = _newton_step(S, theta, W, rho, _MODEL_SWEEPS)
        if not decrease < 0:
            break
        alpha = 1.0
        for _ in range(60):
            trial = theta + alpha * D
            f_new = _chol_objective(trial, S, rho)
            if f_new is not None and f_new <= f + 1e-4 * alpha * decrease:
                break
            alpha *= 0.5
        else:
            break
        theta = 0.5 * (trial + trial.T)
        f = f_new
        if history is not None:
            history.append(n * f)
    W = inv_spd(theta)
    return theta, W, it, _kkt(theta, W, S_tilde, n, lambda1) <= target


def solve_glasso(s_tilde, n, lambda1, tol=1e-6, max_iter=500, warm_start=None,
                 track_objective=False, inner_tol=1e-10, inner_max_iter=10000,
                 method="newton"):
    """Penalised Gaussian maximum likelihood for a precision matrix.

    Parameters
    ----------
    s_tilde : (p, p) array
        PSD scatter matrix with positive diagonal.
    n : int
        Sample count multiplying the log-determinant.
    lambda1 : float
        Off-diagonal l1 weight, on the same (summed) scale as ``s_tilde``.
    tol : float
        Stop once the KKT residual is ``<= tol * (1 + max|s_tilde|)``.
    warm_start : (p, p) array, optional
        SPD starting precision; defaults to ``diag(n / (s_ii + lambda1))``.
    method : {"newton", "bcd"}
        Solver (see the module docstring). If the Newton iterations stall
        before reaching ``tol``, block coordinate descent takes over from the
        last iterate.

    Returns
    -------
    GlassoSolution
    """
    S_tilde = as_sym(s_tilde)
    p = S_tilde.shape[0]
    if n < 1 or lambda1 < 0 or tol <= 0:
        raise InvalidInput("need n >= 1, lambda1 >= 0 and tol > 0")
    diag = np.diag(S_tilde)
    if np.any(diag < 0):
        raise InvalidInput("scatter matrix has a negative diagonal entry")
    scale = 1.0 + float(np.max(np.abs(S_tilde)))
    target = tol * scale

    if lambda1 == 0:
        c_hat = n * inv_spd(S_tilde)
        sigma = S_tilde / n
        hist = [glasso_objective(c_hat, S_tilde, n, 0.0)] if track_objective else []
        return GlassoSolution(c_hat, sigma, 0, True, hist)
    if np.any(diag <= 0):
        raise InvalidInput("scatter matrix needs a strictly positive diagonal")

    S = S_tilde / n
    rho = lambda1 / n
    if warm_start is None:
        theta = np.diag(n / (diag + lambda1))
    else:
        theta = as_sym(warm_start)
    W = inv_spd(theta)
    if p == 1:
        c_hat = np.array([[n / diag[0]]])
        return GlassoSolution(c_hat, 1.0 / c_hat, 0, True, [])

    if method not in ("newton", "bcd"):
        raise InvalidInput(f"unknown glasso method {method!r}")
    history = [glasso_objective(theta, S_tilde, n, lambda1)] if track_objective else []
    it = 0
    if method == "newton":
        # n times the normalised objective is the summed one
        theta, W, it, converged = _newton(S_tilde, S, n, lambda1, rho, theta, target, max_iter,
                                          history if track_objective else None)
        if converged:
            return GlassoSolution(theta, W, it, True, history)
    converged = False
    while it < max_iter:
        it += 1
        _sweep(S, theta, W, rho, inner_tol, inner_max_iter)
        if it % _REFRESH_EVERY == 0:
            W = inv_spd(theta)
        if track_objective:
            history.append(glasso_objective(theta, S_tilde, n, lambda1))
        if _kkt(theta, W, S_tilde, n, lambda1) <= 0.5 * target:
            W = inv_spd(theta)
            if _kkt(theta, W, S_tilde, n, lambda1) <= target:
                converged = True
                break
    theta = 0.5 * (theta + theta.T)
    sigma = inv_spd(theta)
    return GlassoSolution(theta, sigma, it, converged, history)
