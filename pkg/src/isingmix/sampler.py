"""Importance sampling for posterior means of interaction indicators and weights.

The Ising model uses the Laplace proposal ``N(theta_map, Sigma / N)``;
mixtures use a mixture over local optima of Dirichlet(weights) x
normal(Theta) products.  All weights are formed on the log scale.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    BinaryTable,
    IsingParams,
    MixtureParams,
    build_design_matrix,
    log_cell_probabilities_vec,
    n_pairs,
    n_params,
    theta_from_free,
)
from .optimize import LocalOptimum, fit_map_ising, multi_start_mixture
from .prior import PriorConfig, log_bracket, r_score

logger = logging.getLogger(__name__)

ESS_WARN = 10.0
ESS_DEGENERATE = 1.5
_CHUNK = 20_000


class DegenerateWeightsError(RuntimeError):
    pass


@dataclass
class PosteriorSummary:
    """Posterior means with replicate standard errors.

    ``gamma_mean[k, s]`` is the estimate of E(gamma_s^(k) | n) for pair
    slot ``s``; components are in canonical (descending weight) order.
    """

    K: int
    d: int
    shared_main: bool
    prior: PriorConfig
    gamma_mean: np.ndarray
    weight_mean: np.ndarray
    gamma_se: np.ndarray
    weight_se: np.ndarray
    M: int
    R: int
    seed: int
    ess: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    J: int | None = None
    n_optima: int | None = None

    def to_dict(self) -> dict:
        return {
            "K": self.K, "d": self.d, "shared_main": self.shared_main,
            "prior": self.prior.to_dict(), "M": self.M, "R": self.R, "seed": self.seed,
            "J": self.J, "n_optima": self.n_optima,
            "gamma_mean": self.gamma_mean.tolist(),
            "gamma_se": self.gamma_se.tolist(),
            "weight_mean": self.weight_mean.tolist(),
            "weight_se": self.weight_se.tolist(),
            "ess": [float(e) for e in self.ess],
            "warnings": list(self.warnings),
        }


def replicate_se(estimates) -> np.ndarray:
    """Elementwise sample standard deviation across replicates (axis 0)."""
    est = np.asarray(estimates, dtype=float)
    if est.shape[0] < 2:
        raise ValueError("need at least 2 replicates")
    return est.std(axis=0, ddof=1)


def _replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, r]))


def _self_normalize(logw: np.ndarray) -> tuple[np.ndarray, float]:
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return w, float(1.0 / np.sum(w**2))


def _regularized_loglik_batch(thetas: np.ndarray, d: int, freqs: np.ndarray,
                              N: float, sigma1: float) -> np.ndarray:
    out = np.empty(thetas.shape[0])
    for s in range(0, thetas.shape[0], _CHUNK):
        th = thetas[s:s + _CHUNK]
        out[s:s + _CHUNK] = log_cell_probabilities_vec(th, d) @ freqs
    return out - np.einsum("ij,ij->i", thetas, thetas) / (2 * N * sigma1**2)


def log_h3_batch(thetas: np.ndarray, table: BinaryTable, prior: PriorConfig,
                 opt: LocalOptimum) -> np.ndarray:
    """Vectorized log IS weight kernel for the Ising Laplace proposal."""
    d, N = table.d, table.N
    center = opt.theta.vector
    delta = thetas - center
    quad = np.einsum("ij,jk,ik->i", delta, opt.hessian_theta, delta)
    ll = _regularized_loglik_batch(thetas, d, table.freqs, N, prior.sigma1)
    return (N * ll - N * opt.value + 0.5 * N * quad
            + log_bracket(thetas[:, d:], prior).sum(axis=1))


def _ising_replicate(table, prior, opt, chol, M, rng):
    q = n_params(table.d)
    z = rng.standard_normal((M, q))
    thetas = opt.theta.vector + z @ chol.T
    logw = log_h3_batch(thetas, table, prior, opt)
    w, ess = _self_normalize(logw)
    return w @ r_score(thetas[:, table.d:], prior), ess


def _run_replicates(fn, R: int, n_jobs: int):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(fn, range(R)))
    return [fn(r) for r in range(R)]


def posterior_gamma_ising(table: BinaryTable, prior: PriorConfig, M: int = 100_000,
                          rng_seed: int = 0, R: int = 1, cov_scale: float = 1.0,
                          opt: LocalOptimum | None = None, n_jobs: int = 1) -> PosteriorSummary:
    """E(gamma | n) for the Ising model by self-normalized importance sampling.

    Parameters
    ----------
    M : int
        Draws per replicate (at least 100).
    R : int
        Independent replicates; replicate ``r`` uses a stream derived
        from ``(rng_seed, r)``.
    cov_scale : float
        Multiplier on the proposal covariance ``Sigma / N``.  ``0`` makes
        the proposal a point mass at the MAP.
    opt : LocalOptimum, optional
        Precomputed MAP fit.
    """
    if M < 100:
        raise ValueError("M must be at least 100")
    if opt is None:
        opt = fit_map_ising(table, prior)
    cov = np.linalg.inv(opt.hessian_theta) / table.N
    cov = 0.5 * (cov + cov.T) * cov_scale
    if cov_scale == 0:
        chol = np.zeros_like(cov)
    else:
        chol = np.linalg.cholesky(cov)

    def one(r):
        return _ising_replicate(table, prior, opt, chol, M, _replicate_rng(rng_seed, r))

    results = _run_replicates(one, R, n_jobs)
    est = np.array([g for g, _ in results])
    ess = [e for _, e in results]
    notes = _ess_notes(ess)
    se = replicate_se(est) if R >= 2 else np.full(est.shape[1], np.nan)
    return PosteriorSummary(1, table.d, True, prior, est.mean(axis=0)[None, :],
                            np.ones(1), se[None, :], np.zeros(1), M, R, rng_seed, ess, notes)


def _ess_notes(ess):
    notes = []
    for r, e in enumerate(ess):
        if e < ESS_WARN:
            msg = f"replicate {r}: effective sample size {e:.1f} < {ESS_WARN:g}"
            warnings.warn(msg, RuntimeWarning)
            notes.append(msg)
    return notes


def _log_dirichlet(w: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return (gammaln(alpha.sum()) - gammaln(alpha).sum()
            + np.log(w) @ (alpha - 1))


class MixtureProposal:
    """Mixture over local optima of Dirichlet x multivariate-normal products.

    Component ``j`` has mixing weight proportional to ``exp(value_j)``,
    weights ``~ Dirichlet(N w_j + 1)`` and free Theta
    ``~ N(Theta_j, inv(hessian_theta_j) / N)``.
    """

    def __init__(self, optima: Sequence[LocalOptimum], table: BinaryTable):
        optima = [o for o in optima if o.converged and o.is_pd]
        if not optima:
            raise ValueError("no converged optima with positive definite Hessian")
        self.optima = optima
        self.N = table.N
        self.K = optima[0].params.K
        self.d = optima[0].params.d
        self.shared_main = optima[0].params.shared_main
        values = np.array([o.value for o in optima])
        self.log_mix = values - logsumexp(values)
        self.alphas = [self.N * o.params.weights + 1.0 for o in optima]
        self.means = [o.free_theta for o in optima]
        self.chols, self.prec_chols, self.log_norms = [], [], []
        for o in optima:
            prec = self.N * 0.5 * (o.hessian_theta + o.hessian_theta.T)
            Lp = np.linalg.cholesky(prec)
            self.prec_chols.append(Lp)
            # covariance factor: cov = inv(prec) = inv(Lp)^T inv(Lp)
            self.chols.append(np.linalg.inv(Lp).T)
            dim = prec.shape[0]
            self.log_norms.append(np.log(np.diag(Lp)).sum() - 0.5 * dim * np.log(2 * np.pi))

    @property
    def J(self) -> int:
        return len(self.optima)

    @property
    def mixing_weights(self) -> np.ndarray:
        return np.exp(self.log_mix)

    @property
    def dim(self) -> int:
        return self.means[0].size

    def sample(self, M: int, rng: np.random.Generator, j: int | None = None):
        """Draw ``M`` pairs ``(weights (M, K), free Theta (M, dim))``."""
        if j is None:
            labels = rng.choice(self.J, size=M, p=self.mixing_weights)
        else:
            labels = np.full(M, j)
        W = np.empty((M, self.K))
        T = np.empty((M, self.dim))
        for jj in range(self.J):
            idx = np.flatnonzero(labels == jj)
            if idx.size == 0:
                continue
            W[idx] = rng.dirichlet(self.alphas[jj], size=idx.size)
            z = rng.standard_normal((idx.size, self.dim))
            T[idx] = self.means[jj] + z @ self.chols[jj].T
        W = np.clip(W, 1e-300, None)
        W /= W.sum(axis=1, keepdims=True)
        return W, T

    def component_logpdf(self, W: np.ndarray, T: np.ndarray, j: int) -> np.ndarray:
        dev = (T - self.means[j]) @ self.prec_chols[j]
        log_norm = self.log_norms[j] - 0.5 * np.einsum("ij,ij->i", dev, dev)
        return _log_dirichlet(W, self.alphas[j]) + log_norm

    def logpdf(self, W: np.ndarray, T: np.ndarray) -> np.ndarray:
        W = np.atleast_2d(W)
        T = np.atleast_2d(T)
        comps = np.array([self.log_mix[j] + self.component_logpdf(W, T, j)
                          for j in range(self.J)])
        return logsumexp(comps, axis=0)


def build_mixture_proposal(optima: Sequence[LocalOptimum], table: BinaryTable) -> MixtureProposal:
    return MixtureProposal(optima, table)


def log_h4_batch(W: np.ndarray, T: np.ndarray, table: BinaryTable, prior: PriorConfig,
                 shared_main: bool) -> np.ndarray:
    """Vectorized log unnormalized mixture posterior over draws."""
    d, N = table.d, table.N
    M, K = W.shape
    alpha = prior.alpha_for(K)
    out = np.empty(M)
    logW = np.log(W)
    for s in range(0, M, _CHUNK):
        sl = slice(s, s + _CHUNK)
        mats = theta_from_free(T[sl], d, K, shared_main)            # (m, K, q)
        logp = log_cell_probabilities_vec(mats, d)                    # (m, K, C)
        logmix = logsumexp(logp + logW[sl, :, None], axis=1)          # (m, C)
        out[sl] = logmix @ table.freqs
    free_sq = np.einsum("ij,ij->i", T, T)
    ll_tilde = out + (logW @ (alpha - 1)) / N - free_sq / (2 * N * prior.sigma1**2)
    inter = _interactions_of_free(T, d, K, shared_main)
    return N * ll_tilde + log_bracket(inter, prior).sum(axis=(1, 2))


def _interactions_of_free(T, d, K, shared_main):
    mats = theta_from_free(T, d, K, shared_main)
    return mats[..., d:]


def _mixture_replicate(table, prior, proposal: MixtureProposal, M, rng):
    W, T = proposal.sample(M, rng)
    logw = log_h4_batch(W, T, table, prior, proposal.shared_main) - proposal.logpdf(W, T)
    w, ess = _self_normalize(logw)
    inter = _interactions_of_free(T, table.d, proposal.K, proposal.shared_main)
    gamma = np.einsum("m,mkp->kp", w, r_score(inter, prior))
    return gamma, w @ W, ess


def posterior_mixture(table: BinaryTable, prior: PriorConfig, K: int, shared_main: bool = True,
                      J: int = 5, M: int = 100_000, R: int = 100, rng_seed: int = 0,
                      optima: Sequence[LocalOptimum] | None = None,
                      n_jobs: int = 1) -> PosteriorSummary:
    """E(Gamma | n) and E(w | n) for a K-component mixture.

    Runs ``J`` multi-start optimizations (unless ``optima`` is given),
    builds the proposal and averages ``R`` replicate IS estimates.
    """
    if K == 1:
        return posterior_gamma_ising(table, prior, M, rng_seed, R, n_jobs=n_jobs)
    if M < 1000 or R < 1:
        raise ValueError("need M >= 1000 and R >= 1")
    if optima is None:
        optima = multi_start_mixture(table, prior, K, shared_main, J, rng_seed)
    proposal = build_mixture_proposal(optima, table)

    def one(r):
        return _mixture_replicate(table, prior, proposal, M, _replicate_rng(rng_seed, r))

    results = _run_replicates(one, R, n_jobs)
    ess = [e for *_, e in results]
    notes = _ess_notes(ess)
    if max(ess) < ESS_DEGENERATE:
        raise DegenerateWeightsError("all replicates have degenerate importance weights")
    gam = np.array([results[i][0] for i in range(R)])
    wts = np.array([results[i][1] for i in range(R)])
    if R >= 2:
        gse, wse = replicate_se(gam), replicate_se(wts)
    else:
        gse, wse = np.full(gam.shape[1:], np.nan), np.full(K, np.nan)
    return PosteriorSummary(K, table.d, shared_main, prior, gam.mean(axis=0), wts.mean(axis=0),
                            gse, wse, M, R, rng_seed, ess, notes, J=J,
                            n_optima=proposal.J)


def quadrature_oracle(table: BinaryTable, prior: PriorConfig, n_grid: int = 81,
                      width: float = 8.0) -> np.ndarray:
    """Deterministic grid integration of E(gamma_12 | n) for d <= 2, K = 1.

    The tensor grid spans the MAP plus/minus ``width`` Laplace standard
    deviations per axis.  Returns an array of the d(d-1)/2 posterior means
    (empty for d = 1).
    """
    d = table.d
    if d > 2:
        raise NotImplementedError("quadrature oracle supports d <= 2 only")
    if d == 1:
        return np.zeros(0)
    opt = fit_map_ising(table, prior)
    sd = np.sqrt(np.diag(np.linalg.inv(opt.hessian_theta)) / table.N)
    axes = [np.linspace(c - width * s, c + width * s, n_grid)
            for c, s in zip(opt.theta.vector, sd)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    N = table.N
    ll = _regularized_loglik_batch(grid, d, table.freqs, N, prior.sigma1)
    logh1 = N * ll + log_bracket(grid[:, 2], prior)
    w = np.exp(logh1 - logh1.max())
    w /= w.sum()
    return np.array([w @ r_score(grid[:, 2], prior)])
