"""Continuous spike-and-slab prior and the unnormalized posterior kernels.

Every kernel is returned on the log scale; form ratios by subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .model import (
    BinaryTable,
    DomainError,
    IsingParams,
    MixtureParams,
    log_likelihood_ising,
    regularized_log_likelihood_mixture,
)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters.

    Parameters
    ----------
    sigma0 : float
        Spike standard deviation.
    sigma1 : float
        Slab standard deviation; also the prior sd of main effects.
    beta : float
        Prior probability that an interaction indicator is 1.
    alpha : float or sequence of float
        Dirichlet parameter(s) for the mixture weights.  A scalar is
        broadcast to every component.
    """

    sigma0: float = 0.1
    sigma1: float = 1.0
    beta: float = 0.5
    alpha: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        if not 0 < self.sigma0 <= self.sigma1:
            raise DomainError(
                f"need 0 < sigma0 <= sigma1, got sigma0={self.sigma0}, sigma1={self.sigma1}")
        if not 0 < self.beta < 1:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if np.any(alpha <= 0):
            raise DomainError("alpha must be positive")
        if not np.isscalar(self.alpha):
            object.__setattr__(self, "alpha", tuple(float(a) for a in alpha))

    def alpha_for(self, K: int) -> np.ndarray:
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.size == 1:
            return np.full(K, alpha[0])
        if alpha.size != K:
            raise DomainError(f"alpha has {alpha.size} entries, model has K={K}")
        return alpha

    @property
    def log_odds_scale(self) -> float:
        """``log[(1 - beta) sigma1 / (beta sigma0)]``."""
        return float(np.log1p(-self.beta) + np.log(self.sigma1)
                     - np.log(self.beta) - np.log(self.sigma0))

    @property
    def quad_coef(self) -> float:
        """``(1/sigma1^2 - 1/sigma0^2) / 2`` (non-positive)."""
        return 0.5 * (1.0 / self.sigma1**2 - 1.0 / self.sigma0**2)

    def to_dict(self) -> dict:
        return {"sigma0": self.sigma0, "sigma1": self.sigma1, "beta": self.beta,
                "alpha": self.alpha if np.isscalar(self.alpha) else list(self.alpha)}


SETTING_1 = PriorConfig(sigma0=0.1, sigma1=1.0, beta=0.5)
SETTING_2 = PriorConfig(sigma0=0.01, sigma1=1.0, beta=0.5)


def _bracket_exponent(theta, prior: PriorConfig):
    # log of the first summand of (1-b)s1/(b s0) * exp(theta^2 (1/s1^2 - 1/s0^2)/2) + 1
    theta = np.asarray(theta, dtype=float)
    return prior.log_odds_scale + prior.quad_coef * theta**2


def r_score(theta_pair, prior: PriorConfig):
    """Posterior inclusion probability of an interaction given its value.

    Equals ``1 / (1 + c exp(t))`` with ``log c + t`` the bracket exponent;
    evaluated as a logistic function so large ``|theta|`` saturates at 1.
    """
    z = _bracket_exponent(theta_pair, prior)
    out = expit(-z)
    return float(out) if np.ndim(out) == 0 else out


gamma_conditional = r_score


def log_bracket(theta_pair, prior: PriorConfig):
    """``log[c exp(t) + 1]`` elementwise, stable for large positive or negative exponent."""
    z = _bracket_exponent(theta_pair, prior)
    return np.logaddexp(z, 0.0)


def log_bracket_sum(inter: np.ndarray, prior: PriorConfig) -> np.ndarray:
    """Sum of :func:`log_bracket` over the last axis."""
    return log_bracket(inter, prior).sum(axis=-1)


def log_h1(theta: IsingParams, table: BinaryTable, prior: PriorConfig) -> float:
    """Log of the unnormalized Ising posterior density of theta."""
    vec = theta.vector
    return float(table.N * log_likelihood_ising(theta, table)
                 - vec @ vec / (2 * prior.sigma1**2)
                 + log_bracket_sum(theta.inter, prior))


def log_h3(theta: IsingParams, table: BinaryTable, prior: PriorConfig,
           center: IsingParams, precision: np.ndarray, center_value: float | None = None) -> float:
    """Log importance weight kernel ``log h1 - log h2`` up to a constant.

    Parameters
    ----------
    center : IsingParams
        Maximizer of the regularized log-likelihood.
    precision : ndarray
        Negated Hessian of the regularized (per-observation)
        log-likelihood at ``center``; must be positive definite.
    center_value : float, optional
        Regularized log-likelihood at ``center`` if already known.
    """
    from .model import regularized_log_likelihood_ising

    precision = np.asarray(precision, dtype=float)
    try:
        np.linalg.cholesky(0.5 * (precision + precision.T))
    except np.linalg.LinAlgError as exc:
        raise DomainError("precision matrix is not positive definite") from exc
    N = table.N
    if center_value is None:
        center_value = regularized_log_likelihood_ising(center, table, prior)
    delta = theta.vector - center.vector
    return float(N * regularized_log_likelihood_ising(theta, table, prior) - N * center_value
                 + 0.5 * N * delta @ precision @ delta
                 + log_bracket_sum(theta.inter, prior))


def log_h4(params: MixtureParams, table: BinaryTable, prior: PriorConfig) -> float:
    """Log of the unnormalized mixture posterior density of ``(w, Theta)``."""
    inter = np.array([c.inter for c in params.components])
    return float(table.N * regularized_log_likelihood_mixture(params, table, prior)
                 + log_bracket_sum(inter, prior).sum())
