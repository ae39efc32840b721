"""Local identifiability of Ising mixtures.

Fisher information from exact per-cell scores, an eigenvalue rank test,
activation graphs with the sufficient conditions built on them, and two
closed-form families of distinct parameters with equal cell
probabilities.

Graph vertices and edges are one-based, matching cell labels and DOT
output; everything indexed into arrays stays zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import (
    DimensionError,
    DomainError,
    IsingParams,
    MixtureParams,
    build_design_matrix,
    log_cell_probabilities_vec,
    mixture_cell_probabilities,
    n_pairs,
    pair_index,
    pair_list,
)

EDGE_TOL = 1e-12
RANK_TOL = 1e-8


@dataclass(frozen=True)
class ParameterMask:
    """Which coordinates of a mixture are unknown.

    Parameters
    ----------
    free_weights : bool
        If true the first ``K - 1`` weights are free (``w_K`` is
        eliminated through the sum constraint).
    free_inter : ndarray of bool, shape (K, d(d-1)/2)
    free_main : ndarray of bool, shape (d,)
        Applied once when main effects are shared, otherwise to every
        component.
    """

    free_weights: bool
    free_inter: np.ndarray
    free_main: np.ndarray

    def __post_init__(self):
        inter = np.atleast_2d(np.asarray(self.free_inter, dtype=bool))
        main = np.asarray(self.free_main, dtype=bool).ravel()
        object.__setattr__(self, "free_inter", inter)
        object.__setattr__(self, "free_main", main)
        if not (self.free_weights and inter.shape[0] > 1) and not inter.any() and not main.any():
            raise DomainError("mask frees no coordinate")

    @property
    def K(self) -> int:
        return self.free_inter.shape[0]

    @property
    def d(self) -> int:
        return self.free_main.size

    @classmethod
    def all_free(cls, K: int, d: int) -> "ParameterMask":
        return cls(K > 1, np.ones((K, n_pairs(d)), bool), np.ones(d, bool))

    @classmethod
    def interactions(cls, d: int, free: dict[int, list[tuple[int, int]]],
                     free_weights: bool = False, K: int | None = None) -> "ParameterMask":
        """Mask freeing the listed one-based pairs per zero-based component.

        Main effects are fixed.
        """
        K = K if K is not None else max(free) + 1
        inter = np.zeros((K, n_pairs(d)), bool)
        for k, pairs in free.items():
            for a, b in pairs:
                inter[k, pair_index(a - 1, b - 1, d)] = True
        return cls(free_weights, inter, np.zeros(d, bool))

    def n_free(self, shared_main: bool) -> int:
        n_main = int(self.free_main.sum()) * (1 if shared_main else self.K)
        n_w = self.K - 1 if self.free_weights else 0
        return n_w + n_main + int(self.free_inter.sum())

    def to_dict(self) -> dict:
        return {"free_weights": bool(self.free_weights),
                "free_inter": self.free_inter.astype(int).tolist(),
                "free_main": self.free_main.astype(int).tolist()}


def _check_mask(params: MixtureParams, mask: ParameterMask) -> None:
    if mask.K != params.K or mask.d != params.d or mask.free_inter.shape[1] != n_pairs(params.d):
        raise DimensionError(
            f"mask is for K={mask.K}, d={mask.d}; parameters have K={params.K}, d={params.d}")


def score_matrix(params: MixtureParams, mask: ParameterMask) -> np.ndarray:
    """Per-cell scores ``d log p_mix,i / d(free coordinates)``, shape ``(n_free, 2^d)``.

    Coordinate order: free weights, free main effects (once if shared,
    else per component), then free interactions component by component.
    """
    _check_mask(params, mask)
    d, K = params.d, params.K
    A = build_design_matrix(d)
    logp = log_cell_probabilities_vec(params.theta_matrix(), d)
    p = np.exp(logp)
    pmix = params.weights @ p
    resp = params.weights[:, None] * p / pmix
    # centered sufficient statistics per component: A - E_k[A]
    centered = A[None, :, :] - (p @ A.T)[:, :, None]
    comp_scores = resp[:, None, :] * centered  # (K, q, C)

    rows = []
    if mask.free_weights and K > 1:
        for j in range(K - 1):
            rows.append((p[j] - p[K - 1]) / pmix)
    main_idx = np.flatnonzero(mask.free_main)
    if params.shared_main:
        rows.extend(comp_scores[:, main_idx, :].sum(axis=0))
    else:
        for k in range(K):
            rows.extend(comp_scores[k, main_idx, :])
    for k in range(K):
        rows.extend(comp_scores[k, d + np.flatnonzero(mask.free_inter[k]), :])
    return np.array(rows).reshape(len(rows), 2**d)


def fisher_information(params: MixtureParams, mask: ParameterMask) -> np.ndarray:
    """Per-observation Fisher information ``sum_i p_i s_i s_i^T`` over the free coordinates."""
    S = score_matrix(params, mask)
    pmix = mixture_cell_probabilities(params)
    info = (S * pmix) @ S.T
    return 0.5 * (info + info.T)


@dataclass(frozen=True)
class IdentifiabilityResult:
    identifiable_at_point: bool
    eigenvalues: np.ndarray
    rank: int
    tol: float

    def to_dict(self) -> dict:
        return {"identifiable_at_point": bool(self.identifiable_at_point),
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "rank": int(self.rank), "tol": self.tol}


def local_identifiability_test(params: MixtureParams, mask: ParameterMask,
                               tol: float = RANK_TOL) -> IdentifiabilityResult:
    """Rank test on the Fisher information.

    An eigenvalue counts as zero when ``|lambda| <= tol * max|lambda|``.
    Eigenvalues are returned in descending order.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    eig = np.sort(np.linalg.eigvalsh(fisher_information(params, mask)))[::-1]
    scale = np.abs(eig).max() if eig.size else 0.0
    rank = int(np.sum(np.abs(eig) > tol * scale)) if scale > 0 else 0
    return IdentifiabilityResult(rank == eig.size, eig, rank, tol)


@dataclass(frozen=True)
class ActivationGraph:
    """Graph of nonzero interactions; one-based vertices."""

    vertices: tuple[int, ...]
    edges: frozenset

    @property
    def activation_vertices(self) -> frozenset:
        return frozenset(v for e in self.edges for v in e)

    def project(self, subset) -> "ActivationGraph":
        """Induced subgraph on ``subset``."""
        keep = frozenset(subset)
        return ActivationGraph(tuple(v for v in self.vertices if v in keep),
                               frozenset(e for e in self.edges if e[0] in keep and e[1] in keep))

    def projected(self) -> "ActivationGraph":
        """Induced subgraph on the activation vertices."""
        return self.project(self.activation_vertices)


def activation_sets(theta: IsingParams, tol: float = EDGE_TOL) -> ActivationGraph:
    d = theta.d
    edges = frozenset((a + 1, b + 1) for (a, b), t in zip(pair_list(d), theta.inter)
                      if abs(t) > tol)
    return ActivationGraph(tuple(range(1, d + 1)), edges)


@dataclass(frozen=True)
class AssumptionReport:
    shared_main: bool
    single_unknown_component: bool
    fixed_weights: bool
    disjoint_activation: bool
    activation_vertices: tuple[tuple[int, ...], ...]

    @property
    def prop_single_component(self) -> bool:
        """Shared mains, one unknown component, fixed weights."""
        return self.shared_main and self.single_unknown_component and self.fixed_weights

    @property
    def prop_disjoint(self) -> bool:
        """Shared mains, fixed weights, disjoint activation vertices."""
        return self.shared_main and self.fixed_weights and self.disjoint_activation

    @property
    def certified(self) -> bool:
        return self.prop_single_component or self.prop_disjoint

    def to_dict(self) -> dict:
        return {"A1_shared_main": self.shared_main,
                "A2_single_unknown_component": self.single_unknown_component,
                "A3_fixed_weights": self.fixed_weights,
                "A4_disjoint_activation": self.disjoint_activation,
                "activation_vertices": [list(v) for v in self.activation_vertices],
                "prop_single_component": self.prop_single_component,
                "prop_disjoint": self.prop_disjoint,
                "certified": self.certified}


def check_assumptions(params: MixtureParams, mask: ParameterMask) -> AssumptionReport:
    """Evaluate the four sufficient-condition assumptions at ``params``.

    Disjointness is checked pairwise; for ``K = 2`` this equals an empty
    common intersection.
    """
    _check_mask(params, mask)
    act = [activation_sets(c).activation_vertices for c in params.components]
    disjoint = all(not (a & b) for a, b in combinations(act, 2))
    n_unknown = int(np.sum(mask.free_inter.any(axis=1)))
    return AssumptionReport(
        shared_main=bool(params.shared_main),
        single_unknown_component=n_unknown <= 1,
        fixed_weights=not mask.free_weights or params.K == 1,
        disjoint_activation=disjoint,
        activation_vertices=tuple(tuple(sorted(a)) for a in act),
    )


def verify_equal_distribution(a: MixtureParams, b: MixtureParams) -> float:
    """Max absolute difference of the two cell-probability vectors."""
    if a.d != b.d:
        raise DimensionError(f"d differs: {a.d} vs {b.d}")
    return float(np.abs(mixture_cell_probabilities(a) - mixture_cell_probabilities(b)).max())


class OutOfFamilyError(DomainError):
    """The requested alternative weight leaves the equal-distribution family."""


def _check_w(w: float, name: str) -> None:
    if not 0 < w < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {w}")


def example2_mixture(theta12: float, w1: float) -> MixtureParams:
    """``d = 2``, zero mains; component 1 carries ``theta12``, component 2 is uniform."""
    c1 = IsingParams(np.zeros(2), np.array([theta12]))
    c2 = IsingParams(np.zeros(2), np.zeros(1))
    return MixtureParams(np.array([w1, 1 - w1]), (c1, c2), shared_main=True)


def example2_mask() -> ParameterMask:
    return ParameterMask.interactions(2, {0: [(1, 2)]}, free_weights=True, K=2)


def family_example2(theta12_true: float, w_true: float, w_alt: float) -> tuple[float, float]:
    """Interaction that reproduces the ``d = 2`` mixture at weight ``w_alt``.

    Solves the ``p_00`` equation for the odds ratio, then every cell
    matches.
    """
    _check_w(w_true, "w_true")
    _check_w(w_alt, "w_alt")
    eta = np.exp(theta12_true)
    denom = 4.0 * (w_true / (3.0 + eta) + (w_alt - w_true) / 4.0)
    if denom <= 0:
        raise OutOfFamilyError(f"no alternative at w_alt={w_alt}")
    eta_alt = eta + (1.0 - eta) * (w_alt - w_true) / denom
    if eta_alt <= 0:
        raise OutOfFamilyError(f"odds ratio {eta_alt} <= 0 at w_alt={w_alt}")
    return float(np.log(eta_alt)), float(w_alt)


def example4_mixture(theta12: float, theta34: float, w1: float) -> MixtureParams:
    """``d = 4``, zero mains; component 1 carries (1,2), component 2 carries (3,4)."""
    c1 = IsingParams.from_pairs(4, {(1, 2): theta12}, np.zeros(4))
    c2 = IsingParams.from_pairs(4, {(3, 4): theta34}, np.zeros(4))
    return MixtureParams(np.array([w1, 1 - w1]), (c1, c2), shared_main=True)


def example4_mask() -> ParameterMask:
    return ParameterMask.interactions(4, {0: [(1, 2)], 1: [(3, 4)]}, free_weights=True, K=2)


def family_example4(theta12_true: float, theta34_true: float, w_true: float,
                    w_alt: float) -> tuple[float, float, float]:
    """Interactions that reproduce the ``d = 4`` disjoint mixture at weight ``w_alt``."""
    _check_w(w_true, "w_true")
    _check_w(w_alt, "w_alt")
    e1, e2 = np.exp(theta12_true), np.exp(theta34_true)
    dw = w_alt - w_true
    den1 = w_alt * (e1 + 3) + w_true * (1 - e1)
    den2 = (1 - w_alt) * (e2 + 3) + (1 - w_true) * (1 - e2)
    if den1 == 0 or den2 == 0:
        raise OutOfFamilyError(f"no alternative at w_alt={w_alt}")
    eta1 = e1 + dw * (1 - e1) * (e1 + 3) / den1
    eta2 = e2 - dw * (1 - e2) * (e2 + 3) / den2
    if eta1 <= 0 or eta2 <= 0:
        raise OutOfFamilyError(f"odds ratios ({eta1}, {eta2}) not positive at w_alt={w_alt}")
    return float(np.log(eta1)), float(np.log(eta2)), float(w_alt)


def example4_cell_equations(theta12: float, theta34: float, w1: float) -> np.ndarray:
    """The three distinct cell probabilities ``(p_0000, p_1100, p_0011)``."""
    # the inactive pair of each component is uniform, hence the 1/4
    e1, e2 = np.exp(theta12), np.exp(theta34)
    return 0.25 * np.array([
        w1 / (3 + e1) + (1 - w1) / (3 + e2),
        w1 * e1 / (3 + e1) + (1 - w1) / (3 + e2),
        w1 / (3 + e1) + (1 - w1) * e2 / (3 + e2),
    ])
