"""Exact Ising and Ising-mixture models on the 2^d cells of a binary table.

Cells are ordered lexicographically with the *last* variable varying
fastest, so cell index ``i`` has ``i_v = (i >> (d - v)) & 1`` for
``v = 1..d``.  Interaction pairs ``(v', v)``, ``v' < v`` are stored
row-major: (1,2), (1,3), ..., (1,d), (2,3), ..., (d-1,d).

All log-likelihoods are per observation (divided by ``N``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

MAX_D = 20


class DomainError(ValueError):
    """Raised for parameters outside their admissible domain."""


class DimensionError(ValueError):
    """Raised when table and parameter dimensions disagree."""


def n_pairs(d: int) -> int:
    return d * (d - 1) // 2


def n_params(d: int) -> int:
    return d * (d + 1) // 2


def pair_list(d: int) -> list[tuple[int, int]]:
    """Zero-based pairs ``(a, b)``, ``a < b``, in storage order."""
    return list(combinations(range(d), 2))


def pair_index(a: int, b: int, d: int) -> int:
    """Slot of the zero-based pair ``(a, b)`` in the interaction vector."""
    if a > b:
        a, b = b, a
    if not 0 <= a < b < d:
        raise IndexError(f"invalid pair ({a}, {b}) for d={d}")
    return a * d - a * (a + 1) // 2 + (b - a - 1)


def pair_from_index(idx: int, d: int) -> tuple[int, int]:
    return pair_list(d)[idx]


@lru_cache(maxsize=None)
def _cells(d: int) -> np.ndarray:
    idx = np.arange(2**d)
    shifts = np.arange(d - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def cell_states(d: int) -> np.ndarray:
    """``(2^d, d)`` array of 0/1 states in canonical cell order."""
    if not 1 <= d <= MAX_D:
        raise DomainError(f"d must lie in [1, {MAX_D}], got {d}")
    out = _cells(d).view()
    out.flags.writeable = False
    return out


def cell_label(index: int, d: int) -> str:
    """``'10001100'``-style label of a cell (variable 1 first)."""
    return format(index, f"0{d}b")


def cell_index(label: str) -> int:
    return int(label, 2)


@lru_cache(maxsize=None)
def _design(d: int) -> np.ndarray:
    x = _cells(d).astype(float)
    rows = [x[:, v] for v in range(d)]
    rows += [x[:, a] * x[:, b] for a, b in pair_list(d)]
    A = np.array(rows) if rows else np.zeros((0, 2**d))
    A.flags.writeable = False
    return A


def build_design_matrix(d: int) -> np.ndarray:
    """Design matrix ``A`` of shape ``(d(d+1)/2, 2^d)``.

    Row ``v`` holds ``i_v`` and the row of pair ``(v', v)`` holds
    ``i_{v'} i_v`` for every cell ``i`` in canonical order.
    """
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= MAX_D:
        raise DomainError(f"d must be an integer in [1, {MAX_D}], got {d!r}")
    return _design(int(d))


@dataclass(frozen=True)
class BinaryTable:
    """Counts of a ``2^d`` binary contingency table in canonical order.

    Counts may be real-valued (fixed ``N * p`` tables).
    """

    d: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float).ravel()
        if not 1 <= self.d <= MAX_D:
            raise DomainError(f"d must lie in [1, {MAX_D}], got {self.d}")
        if counts.size != 2**self.d:
            raise DimensionError(
                f"expected {2**self.d} counts for d={self.d}, got {counts.size}")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise DomainError("counts must be finite and nonnegative")
        if counts.sum() <= 0:
            raise DomainError("table total must be positive")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def N(self) -> float:
        return float(self.counts.sum())

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.N

    @property
    def is_integer(self) -> bool:
        return bool(np.all(self.counts == np.round(self.counts)))


@dataclass(frozen=True)
class IsingParams:
    """Main effects ``main`` (length d) and interactions ``inter`` (length d(d-1)/2)."""

    main: np.ndarray
    inter: np.ndarray

    def __post_init__(self):
        main = np.asarray(self.main, dtype=float).ravel().copy()
        inter = np.asarray(self.inter, dtype=float).ravel().copy()
        d = main.size
        if d < 1:
            raise DomainError("need at least one variable")
        if inter.size != n_pairs(d):
            raise DimensionError(
                f"d={d} needs {n_pairs(d)} interactions, got {inter.size}")
        if not (np.all(np.isfinite(main)) and np.all(np.isfinite(inter))):
            raise DomainError("parameters must be finite")
        main.flags.writeable = False
        inter.flags.writeable = False
        object.__setattr__(self, "main", main)
        object.__setattr__(self, "inter", inter)

    @property
    def d(self) -> int:
        return self.main.size

    @property
    def vector(self) -> np.ndarray:
        """``theta`` in design-matrix row order (mains then pairs)."""
        return np.concatenate([self.main, self.inter])

    @classmethod
    def from_vector(cls, theta: Sequence[float], d: int | None = None) -> "IsingParams":
        theta = np.asarray(theta, dtype=float).ravel()
        if d is None:
            d = int(round((np.sqrt(8 * theta.size + 1) - 1) / 2))
        if theta.size != n_params(d):
            raise DimensionError(f"vector of length {theta.size} does not fit d={d}")
        return cls(theta[:d], theta[d:])

    @classmethod
    def zeros(cls, d: int) -> "IsingParams":
        return cls(np.zeros(d), np.zeros(n_pairs(d)))

    @classmethod
    def from_pairs(cls, d: int, pairs: dict[tuple[int, int], float],
                   main: Sequence[float] | float = 0.0) -> "IsingParams":
        """Build from one-based ``{(v', v): value}`` interactions."""
        inter = np.zeros(n_pairs(d))
        for (a, b), val in pairs.items():
            inter[pair_index(a - 1, b - 1, d)] = val
        return cls(np.broadcast_to(np.asarray(main, float), (d,)), inter)


@dataclass(frozen=True)
class MixtureParams:
    """Weights and components of a K-component Ising mixture."""

    weights: np.ndarray
    components: tuple[IsingParams, ...]
    shared_main: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel().copy()
        comps = tuple(self.components)
        if w.size != len(comps) or w.size < 1:
            raise DimensionError("need one weight per component")
        if np.any(w <= 0) or (w.size > 1 and np.any(w >= 1)):
            raise DomainError(f"weights must lie in (0, 1), got {w}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {w.sum()!r}")
        d = comps[0].d
        if any(c.d != d for c in comps):
            raise DimensionError("components disagree on d")
        if self.shared_main:
            m0 = comps[0].main
            if any(not np.array_equal(c.main, m0) for c in comps[1:]):
                raise DomainError("shared_main set but main effects differ")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    @classmethod
    def single(cls, theta: IsingParams) -> "MixtureParams":
        return cls(np.ones(1), (theta,), shared_main=True)

    def theta_matrix(self) -> np.ndarray:
        """``(K, d(d+1)/2)`` stack of component parameter vectors."""
        return np.array([c.vector for c in self.components])

    def permuted(self, perm: Sequence[int]) -> "MixtureParams":
        perm = list(perm)
        return MixtureParams(self.weights[perm], tuple(self.components[i] for i in perm),
                             self.shared_main)


def _check_theta_vec(theta: np.ndarray) -> None:
    if not np.all(np.isfinite(theta)):
        raise DomainError("non-finite parameter")


def log_cell_probabilities_vec(theta: np.ndarray, d: int) -> np.ndarray:
    """Log cell probabilities for one or many parameter vectors.

    ``theta`` has shape ``(q,)`` or ``(..., q)``; the result has the
    matching leading shape with a trailing axis of ``2^d`` cells.
    """
    theta = np.asarray(theta, dtype=float)
    _check_theta_vec(theta)
    eta = theta @ build_design_matrix(d)
    return eta - logsumexp(eta, axis=-1, keepdims=True)


def cell_log_partition(theta: IsingParams) -> float:
    """``log 1^T exp(A^T theta)``, i.e. ``-C(theta)``."""
    eta = theta.vector @ build_design_matrix(theta.d)
    return float(logsumexp(eta))


def cell_probabilities(theta: IsingParams) -> np.ndarray:
    return np.exp(log_cell_probabilities_vec(theta.vector, theta.d))


def _check_weights(w: np.ndarray) -> None:
    if w.size > 1 and (np.any(w <= 0) or np.any(w >= 1)):
        raise DomainError(f"weights must lie in (0, 1), got {w}")


def log_mixture_cell_probabilities(params: MixtureParams) -> np.ndarray:
    _check_weights(params.weights)
    logp = log_cell_probabilities_vec(params.theta_matrix(), params.d)
    return logsumexp(logp + np.log(params.weights)[:, None], axis=0)


def mixture_cell_probabilities(params: MixtureParams) -> np.ndarray:
    """Convex combination ``sum_k w_k p(theta_k)`` of component cell probabilities."""
    _check_weights(params.weights)
    probs = np.exp(log_cell_probabilities_vec(params.theta_matrix(), params.d))
    return params.weights @ probs


def _check_dims(d: int, table: BinaryTable) -> None:
    if table.d != d:
        raise DimensionError(f"table has d={table.d}, parameters have d={d}")


def log_likelihood_ising(theta: IsingParams, table: BinaryTable) -> float:
    """Per-observation log-likelihood ``n^T A^T theta / N - log 1^T exp(A^T theta)``."""
    _check_dims(theta.d, table)
    return float(table.freqs @ log_cell_probabilities_vec(theta.vector, theta.d))


def log_likelihood_mixture(params: MixtureParams, table: BinaryTable) -> float:
    _check_dims(params.d, table)
    return float(table.freqs @ log_mixture_cell_probabilities(params))


def _check_sigma1(sigma1: float) -> None:
    if not sigma1 > 0:
        raise DomainError(f"sigma1 must be positive, got {sigma1}")


def regularized_log_likelihood_ising(theta: IsingParams, table: BinaryTable, prior) -> float:
    _check_sigma1(prior.sigma1)
    vec = theta.vector
    return log_likelihood_ising(theta, table) - vec @ vec / (2 * table.N * prior.sigma1**2)


def free_theta_vector(params: MixtureParams) -> np.ndarray:
    """Free Theta coordinates.

    With ``shared_main`` the layout is ``[main, inter_1, ..., inter_K]``,
    otherwise ``[theta_1, ..., theta_K]``.
    """
    if params.shared_main:
        return np.concatenate([params.components[0].main]
                              + [c.inter for c in params.components])
    return np.concatenate([c.vector for c in params.components])


def theta_expansion(d: int, K: int, shared_main: bool) -> np.ndarray:
    """Linear map from free Theta coordinates to the stacked ``K * q`` vector."""
    q, P = n_params(d), n_pairs(d)
    if not shared_main:
        return np.eye(K * q)
    L = np.zeros((K * q, d + K * P))
    for k in range(K):
        L[k * q:k * q + d, :d] = np.eye(d)
        L[k * q + d:(k + 1) * q, d + k * P:d + (k + 1) * P] = np.eye(P)
    return L


def theta_from_free(free: np.ndarray, d: int, K: int, shared_main: bool) -> np.ndarray:
    """``(K, q)`` component matrix from a free Theta vector."""
    free = np.asarray(free, dtype=float)
    q, P = n_params(d), n_pairs(d)
    if shared_main:
        main = free[..., :d]
        inter = free[..., d:].reshape(free.shape[:-1] + (K, P))
        main = np.broadcast_to(main[..., None, :], free.shape[:-1] + (K, d))
        return np.concatenate([main, inter], axis=-1)
    return free.reshape(free.shape[:-1] + (K, q))


def mixture_from_free(weights, free, d, K, shared_main) -> MixtureParams:
    mat = theta_from_free(free, d, K, shared_main)
    comps = tuple(IsingParams(row[:d], row[d:]) for row in mat)
    return MixtureParams(np.asarray(weights, float), comps, shared_main)


def regularized_log_likelihood_mixture(params: MixtureParams, table: BinaryTable, prior) -> float:
    """Per-observation log-likelihood plus Dirichlet and Gaussian log-prior terms.

    Under ``shared_main`` the common main effects enter the Gaussian
    penalty once.
    """
    _check_sigma1(prior.sigma1)
    alpha = prior.alpha_for(params.K)
    w = params.weights
    if params.K > 1 and np.any(alpha != 1) and (np.any(w <= 0) or np.any(w >= 1)):
        raise DomainError("weights on the simplex boundary with alpha != 1")
    free = free_theta_vector(params)
    N = table.N
    dir_term = float(np.sum((alpha - 1) * np.log(w))) / N if params.K > 1 else 0.0
    return (log_likelihood_mixture(params, table) + dir_term
            - free @ free / (2 * N * prior.sigma1**2))


def gradient_and_hessian_ising(theta: IsingParams, table: BinaryTable, prior):
    """Gradient and Hessian of the regularized Ising log-likelihood.

    Returns
    -------
    grad : ndarray, shape (q,)
        ``A (n/N - p) - theta / (N sigma1^2)``.
    hess : ndarray, shape (q, q)
        ``-[A (diag p - p p^T) A^T + I / (N sigma1^2)]``.
    """
    _check_dims(theta.d, table)
    _check_sigma1(prior.sigma1)
    vec = theta.vector
    return _grad_hess_vec(vec, theta.d, table.freqs, table.N, prior.sigma1)


def _grad_hess_vec(vec, d, freqs, N, sigma1, with_hess=True):
    A = build_design_matrix(d)
    p = np.exp(log_cell_probabilities_vec(vec, d))
    ridge = 0.0 if np.isinf(sigma1) else 1.0 / (N * sigma1**2)
    mu = A @ p
    grad = A @ freqs - mu - ridge * vec
    if not with_hess:
        return grad
    cov = (A * p) @ A.T - np.outer(mu, mu)
    hess = -(cov + ridge * np.eye(vec.size))
    return grad, 0.5 * (hess + hess.T)


def mixture_loglik_derivs(weights: np.ndarray, theta_mat: np.ndarray, d: int,
                          freqs: np.ndarray, hessian: bool = True):
    """Per-observation mixture log-likelihood with derivatives in the stacked Theta.

    Parameters
    ----------
    weights : (K,) array
    theta_mat : (K, q) array of component parameter vectors
    freqs : (2^d,) array of cell frequencies ``n / N``

    Returns
    -------
    value : float
    grad_theta : (K*q,) array
    grad_w : (K,) array, partial derivatives w.r.t. raw weights
    hess_theta : (K*q, K*q) array, or None
    """
    A = build_design_matrix(d)
    K, q = theta_mat.shape
    logp = log_cell_probabilities_vec(theta_mat, d)          # (K, C)
    logw = np.log(weights)
    joint = logp + logw[:, None]
    logmix = logsumexp(joint, axis=0)                      # (C,)
    resp = np.exp(joint - logmix)                          # (K, C)
    value = float(freqs @ logmix)
    comp_probs = np.exp(logp)
    mu = comp_probs @ A.T                                  # (K, q)
    u = freqs[None, :] * resp                              # (K, C)
    mass = u.sum(axis=1)
    grad_theta = (u @ A.T - mass[:, None] * mu).ravel()
    grad_w = np.exp(logp - logmix) @ freqs
    if not hessian:
        return value, grad_theta, grad_w, None
    H = np.zeros((K * q, K * q))
    D = A.T[None, :, :] - mu[:, None, :]                   # (K, C, q)
    for k in range(K):
        cov_k = (A * comp_probs[k]) @ A.T - np.outer(mu[k], mu[k])
        sk = slice(k * q, (k + 1) * q)
        H[sk, sk] += (D[k] * u[k][:, None]).T @ D[k] - mass[k] * cov_k
        for m in range(K):
            sm = slice(m * q, (m + 1) * q)
            H[sk, sm] -= (D[k] * (u[k] * resp[m])[:, None]).T @ D[m]
    return value, grad_theta, grad_w, 0.5 * (H + H.T)


def hessian_mixture_theta(params: MixtureParams, table: BinaryTable, prior) -> np.ndarray:
    """Hessian of the free Theta coordinates of the regularized mixture
    log-likelihood, weights held fixed."""
    _check_dims(params.d, table)
    _check_sigma1(prior.sigma1)
    _, _, _, H = mixture_loglik_derivs(params.weights, params.theta_matrix(),
                                       params.d, table.freqs)
    L = theta_expansion(params.d, params.K, params.shared_main)
    Hf = L.T @ H @ L
    ridge = 1.0 / (table.N * prior.sigma1**2)
    Hf -= ridge * np.eye(Hf.shape[0])
    return 0.5 * (Hf + Hf.T)


def gradient_mixture_theta(params: MixtureParams, table: BinaryTable, prior) -> np.ndarray:
    _, g, _, _ = mixture_loglik_derivs(params.weights, params.theta_matrix(),
                                       params.d, table.freqs, hessian=False)
    L = theta_expansion(params.d, params.K, params.shared_main)
    free = free_theta_vector(params)
    return L.T @ g - free / (table.N * prior.sigma1**2)
