"""Maximization of (regularized) Ising and Ising-mixture log-likelihoods."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .model import (
    BinaryTable,
    IsingParams,
    MixtureParams,
    _grad_hess_vec,
    free_theta_vector,
    log_cell_probabilities_vec,
    mixture_from_free,
    mixture_loglik_derivs,
    n_pairs,
    n_params,
    theta_expansion,
    theta_from_free,
)
from .prior import PriorConfig

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 30.0


class ConvergenceError(RuntimeError):
    pass


@dataclass
class LocalOptimum:
    """A converged (or flagged) stationary point.

    ``hessian_theta`` is the *negated* Hessian of the per-observation
    objective over the free Theta coordinates with weights fixed, so its
    inverse is the Laplace covariance up to the ``1/N`` factor.
    """

    params: MixtureParams
    value: float
    hessian_theta: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float = np.nan
    diverged: bool = False
    start_index: int | None = None

    @property
    def theta(self) -> IsingParams:
        if self.params.K != 1:
            raise AttributeError("theta is only defined for K=1")
        return self.params.components[0]

    @property
    def free_theta(self) -> np.ndarray:
        return free_theta_vector(self.params)

    @property
    def is_pd(self) -> bool:
        return _min_eig(self.hessian_theta) > 1e-10


def _min_eig(H: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])


def _ising_objective(vec, d, freqs, N, sigma1):
    logp = log_cell_probabilities_vec(vec, d)
    ridge = 0.0 if np.isinf(sigma1) else vec @ vec / (2 * N * sigma1**2)
    return float(freqs @ logp) - ridge


def _newton_ising(table: BinaryTable, sigma1: float, tol: float, max_iter: int,
                  armijo: float = 1e-4, shrink: float = 0.5, start=None,
                  bound: float | None = None):
    d, freqs, N = table.d, table.freqs, table.N
    vec = np.zeros(n_params(d)) if start is None else np.asarray(start, float).copy()
    value = _ising_objective(vec, d, freqs, N, sigma1)
    diverged = False
    for it in range(1, max_iter + 1):
        grad, hess = _grad_hess_vec(vec, d, freqs, N, sigma1)
        gnorm = np.max(np.abs(grad))
        if gnorm <= tol:
            return vec, value, -hess, True, it - 1, gnorm, diverged
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        slope = grad @ step
        if not slope > 0:
            step, slope = grad, grad @ grad
        t = 1.0
        while True:
            cand = vec + t * step
            cand_value = _ising_objective(cand, d, freqs, N, sigma1)
            if cand_value >= value + armijo * t * slope or t < 1e-12:
                break
            t *= shrink
        if cand_value < value:
            break
        vec, value = cand, cand_value
        if bound is not None and np.max(np.abs(vec)) > bound:
            diverged = True
            break
    grad, hess = _grad_hess_vec(vec, d, freqs, N, sigma1)
    gnorm = np.max(np.abs(grad))
    return vec, value, -hess, gnorm <= tol, it, gnorm, diverged


def fit_map_ising(table: BinaryTable, prior: PriorConfig, tol: float = 1e-8,
                  max_iter: int = 200, armijo: float = 1e-4, shrink: float = 0.5,
                  start=None) -> LocalOptimum:
    """Unique maximizer of the regularized Ising log-likelihood.

    Newton's method with Armijo backtracking, started from zero unless
    ``start`` is given.  The objective is strictly concave, so failure to
    converge signals a numerical problem and raises
    :class:`ConvergenceError`.
    """
    vec, value, neg_hess, ok, iters, gnorm, _ = _newton_ising(
        table, prior.sigma1, tol, max_iter, armijo, shrink, start)
    if not ok:
        raise ConvergenceError(
            f"Newton did not converge in {max_iter} iterations (|grad|={gnorm:.3g})")
    theta = IsingParams.from_vector(vec, table.d)
    return LocalOptimum(MixtureParams.single(theta), value, neg_hess, True, iters, gnorm)


# -- mixtures ---------------------------------------------------------------

def _softmax_weights(z: np.ndarray) -> np.ndarray:
    zb = np.append(z, 0.0)
    zb = zb - zb.max()
    w = np.exp(zb)
    return w / w.sum()


def _weights_to_z(w: np.ndarray) -> np.ndarray:
    logw = np.log(w)
    return logw[:-1] - logw[-1]


class _MixtureObjective:
    """Negated per-observation objective in ``x = (z, free Theta)``.

    ``ridge`` is ``1 / (N sigma1^2)`` (0 for plain likelihood) and
    ``dir_coef`` is ``(alpha - 1) / N``.
    """

    def __init__(self, table: BinaryTable, K: int, shared_main: bool,
                 ridge: float, dir_coef: np.ndarray):
        self.d, self.K, self.shared_main = table.d, K, shared_main
        self.freqs, self.N = table.freqs, table.N
        self.ridge, self.dir_coef = ridge, dir_coef
        self.L = theta_expansion(self.d, K, shared_main)
        self._cache_x = None

    def split(self, x):
        return _softmax_weights(x[:self.K - 1]), x[self.K - 1:]

    def _eval(self, x):
        if self._cache_x is not None and np.array_equal(x, self._cache_x):
            return self._cache
        K = self.K
        w, free = self.split(x)
        mat = theta_from_free(free, self.d, K, self.shared_main)
        val, g_th, g_w, H_th = mixture_loglik_derivs(w, mat, self.d, self.freqs)
        logw = np.log(w)
        val += self.dir_coef @ logw - 0.5 * self.ridge * free @ free
        g_w = g_w + self.dir_coef / w
        g_free = self.L.T @ g_th - self.ridge * free
        H_free = self.L.T @ H_th @ self.L - self.ridge * np.eye(free.size)

        # weight block: d2/dw dw and d2/dw dTheta in raw weights
        A_t = _design_t(self.d)
        logp = log_cell_probabilities_vec(mat, self.d)
        logmix = np.logaddexp.reduce(logp + logw[:, None], axis=0)
        qk = np.exp(logp - logmix)                      # p_i^k / pmix_i
        resp = qk * w[:, None]
        H_ww = -(qk * self.freqs) @ qk.T - np.diag(self.dir_coef / w**2)
        mu = np.exp(logp) @ A_t
        q = mat.shape[1]
        H_wth = np.zeros((K, K * q))
        for k in range(K):
            Dk = A_t - mu[k]
            for m in range(K):
                coef = self.freqs * ((k == m) * qk[k] - qk[m] * resp[k])
                H_wth[m, k * q:(k + 1) * q] = coef @ Dk
        H_wfree = H_wth @ self.L

        J = w[:, None] * (np.eye(K)[:, :K - 1] - w[None, :K - 1])   # (K, K-1)
        gJ = g_w @ J
        g_z = gJ
        H_zz = J.T @ H_ww @ J
        H_zz += np.diag(g_w[:K - 1]) @ J[:K - 1] - np.outer(w[:K - 1], gJ) - (g_w @ w) * J[:K - 1]
        H_zz = 0.5 * (H_zz + H_zz.T)
        H_zf = J.T @ H_wfree

        grad = np.concatenate([g_z, g_free])
        n = grad.size
        H = np.empty((n, n))
        H[:K - 1, :K - 1] = H_zz
        H[:K - 1, K - 1:] = H_zf
        H[K - 1:, :K - 1] = H_zf.T
        H[K - 1:, K - 1:] = H_free
        self._cache_x = x.copy()
        self._cache = (val, grad, H, H_free)
        return self._cache

    def fun(self, x):
        return -self._eval(x)[0]

    def jac(self, x):
        return -self._eval(x)[1]

    def hess(self, x):
        return -self._eval(x)[2]

    def theta_hessian(self, x):
        return self._eval(x)[3]


def _design_t(d):
    from .model import build_design_matrix
    return build_design_matrix(d).T


def _free_from_params(params: MixtureParams, shared_main: bool) -> np.ndarray:
    if shared_main:
        return np.concatenate([params.components[0].main]
                              + [c.inter for c in params.components])
    return np.concatenate([c.vector for c in params.components])


def _local_mixture(table, K, shared_main, start: MixtureParams, ridge, alpha,
                   gtol, max_iter, bound=None):
    obj = _MixtureObjective(table, K, shared_main, ridge, (alpha - 1) / table.N)
    x0 = np.concatenate([_weights_to_z(start.weights), _free_from_params(start, shared_main)])
    start_value = -obj.fun(x0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(obj.fun, x0, jac=obj.jac, hess=obj.hess, method="trust-exact",
                       options={"gtol": gtol, "maxiter": max_iter})
    x = res.x
    w, free = obj.split(x)
    w = w / w.sum()
    if K > 1 and (np.any(w <= 0) or np.any(w >= 1)):
        w = np.clip(w, 1e-300, None)
        w = w / w.sum()
    gnorm = float(np.max(np.abs(obj.jac(x))))
    neg_hess = -obj.theta_hessian(x)
    value = -obj.fun(x)
    diverged = bool(bound is not None and np.max(np.abs(free)) > bound)
    converged = bool(gnorm <= gtol * 10 and value >= start_value - 1e-12)
    try:
        params = mixture_from_free(w, free, table.d, K, shared_main)
    except ValueError:
        params = None
        converged = False
    return params, value, 0.5 * (neg_hess + neg_hess.T), converged, int(res.nit), gnorm, diverged


def canonicalize(opt: LocalOptimum) -> LocalOptimum:
    """Sort components by descending weight (ties: lexicographic interactions)."""
    p = opt.params
    K = p.K
    if K == 1:
        return opt
    keys = [(-p.weights[k], tuple(p.components[k].inter)) for k in range(K)]
    perm = sorted(range(K), key=lambda k: keys[k])
    if perm == list(range(K)):
        return opt
    idx = free_index_permutation(p.d, K, p.shared_main, perm)
    H = opt.hessian_theta[np.ix_(idx, idx)]
    return LocalOptimum(p.permuted(perm), opt.value, H, opt.converged, opt.iterations,
                        opt.grad_norm, opt.diverged, opt.start_index)


def free_index_permutation(d: int, K: int, shared_main: bool, perm) -> np.ndarray:
    """Index array mapping free-Theta coordinates under a component relabeling."""
    if shared_main:
        P = n_pairs(d)
        blocks = [np.arange(d)] + [d + k * P + np.arange(P) for k in perm]
    else:
        q = n_params(d)
        blocks = [k * q + np.arange(q) for k in perm]
    return np.concatenate(blocks)


def fit_local_mixture(table: BinaryTable, prior: PriorConfig, K: int, shared_main: bool,
                      start: MixtureParams, gtol: float = 1e-8,
                      max_iter: int = 2000) -> LocalOptimum:
    """Local maximizer of the regularized mixture log-likelihood.

    Weights are mapped to the open simplex by a softmax with the last
    logit pinned at 0; the optimizer is a trust-region Newton method with
    the exact Hessian in those coordinates.  The returned optimum keeps
    the start's component labels; see :func:`canonicalize`.
    """
    if start.K != K:
        raise ValueError(f"start has K={start.K}, expected {K}")
    if K == 1:
        opt = fit_map_ising(table, prior, start=start.components[0].vector)
        return opt
    ridge = 1.0 / (table.N * prior.sigma1**2)
    params, value, H, ok, nit, gnorm, _ = _local_mixture(
        table, K, shared_main, start, ridge, prior.alpha_for(K), gtol, max_iter)
    if params is None:
        params = start
    if ok and _min_eig(H) <= 1e-10:
        ok = False
    return LocalOptimum(params, value, H, ok, nit, gnorm)


def random_start(d: int, K: int, shared_main: bool, rng: np.random.Generator,
                 scale: float = 1.0) -> MixtureParams:
    """Weights from a flat Dirichlet and Theta entries ``N(0, scale^2)``."""
    w = rng.dirichlet(np.ones(K))
    w = np.clip(w, 1e-3, None)
    w /= w.sum()
    q = n_params(d)
    if shared_main:
        free = rng.normal(0.0, scale, d + K * n_pairs(d))
    else:
        free = rng.normal(0.0, scale, K * q)
    return mixture_from_free(w, free, d, K, shared_main)


def multi_start_mixture(table: BinaryTable, prior: PriorConfig, K: int, shared_main: bool,
                        J: int, rng_seed: int, gtol: float = 1e-8,
                        keep_failed: bool = False) -> list[LocalOptimum]:
    """Canonicalized local optima from ``J`` seeded random starts.

    Start ``j`` draws from ``numpy.random.default_rng(rng_seed + j)``.
    Non-converged runs are dropped unless ``keep_failed``.
    """
    if J < 1:
        raise ValueError("J must be at least 1")
    out = []
    for j in range(J):
        rng = np.random.default_rng(rng_seed + j)
        start = random_start(table.d, K, shared_main, rng, prior.sigma1)
        opt = fit_local_mixture(table, prior, K, shared_main, start, gtol=gtol)
        opt.start_index = j
        if opt.converged or keep_failed:
            out.append(canonicalize(opt))
        else:
            logger.info("start %d did not converge (|grad|=%.3g)", j, opt.grad_norm)
    if not out:
        raise ConvergenceError(f"all {J} mixture starts failed")
    return out


def fit_mle(table: BinaryTable, K: int = 1, shared_main: bool = True, J: int = 20,
            rng_seed: int = 0, tol: float = 1e-8) -> LocalOptimum:
    """Maximum likelihood fit without prior terms.

    For ``K = 1`` Newton's method from zero; for mixtures the best of
    ``J`` random starts.  If any parameter exceeds
    ``DIVERGENCE_BOUND`` in absolute value the returned optimum carries
    ``diverged=True`` (the MLE may not exist for sparse tables).
    """
    if K == 1:
        vec, value, neg_hess, ok, iters, gnorm, diverged = _newton_ising(
            table, np.inf, tol, 500, bound=DIVERGENCE_BOUND)
        if diverged:
            warnings.warn("Ising MLE diverges; reporting the clamped iterate", RuntimeWarning)
        theta = IsingParams.from_vector(vec, table.d)
        return LocalOptimum(MixtureParams.single(theta), value, neg_hess, ok, iters, gnorm,
                            diverged)
    best = None
    for j in range(J):
        rng = np.random.default_rng(rng_seed + j)
        start = random_start(table.d, K, shared_main, rng, 1.0)
        params, value, H, ok, nit, gnorm, diverged = _local_mixture(
            table, K, shared_main, start, 0.0, np.ones(K), tol, 2000, DIVERGENCE_BOUND)
        if params is None:
            continue
        opt = LocalOptimum(params, value, H, ok, nit, gnorm, diverged, j)
        if best is None or opt.value > best.value:
            best = opt
    if best is None:
        raise ConvergenceError("no mixture MLE start produced valid parameters")
    if best.diverged:
        warnings.warn("mixture MLE has parameters beyond the divergence bound", RuntimeWarning)
    return canonicalize(best)
