"""Goodness-of-fit and likelihood-ratio tests for maximum likelihood fits."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import chi2

from .model import (
    BinaryTable,
    DomainError,
    MixtureParams,
    cell_label,
    log_likelihood_mixture,
    mixture_cell_probabilities,
    n_pairs,
    n_params,
)
from .optimize import LocalOptimum

STATISTICS = ("deviance", "pearson")
# "model": 2^d - 1 - #params; "cells": 2^d - 1 (parameter count ignored)
DF_CONVENTIONS = ("model", "cells")


def count_parameters(d: int, K: int, shared_main: bool) -> int:
    """Free parameters of a K-component mixture, weights included."""
    if K == 1:
        return n_params(d)
    if shared_main:
        return d + K * n_pairs(d) + K - 1
    return K * n_params(d) + K - 1


def _param_count(params: MixtureParams) -> int:
    return count_parameters(params.d, params.K, params.shared_main or params.K == 1)


@dataclass(frozen=True)
class GofResult:
    statistic: float
    df: int
    p_value: float
    kind: str
    df_convention: str
    n_params: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LrtResult:
    statistic: float
    df: int
    p_value: float
    negative: bool
    note: str

    def to_dict(self) -> dict:
        return asdict(self)


def expected_counts(table: BinaryTable, params: MixtureParams) -> np.ndarray:
    return table.N * mixture_cell_probabilities(params)


def deviance(observed: np.ndarray, expected: np.ndarray) -> float:
    """``2 sum n log(n / e)`` with ``0 log 0 = 0``; infinite if some ``e = 0 < n``."""
    pos = observed > 0
    if np.any(expected[pos] <= 0):
        return float("inf")
    return float(2.0 * np.sum(observed[pos] * np.log(observed[pos] / expected[pos])))


def pearson(observed: np.ndarray, expected: np.ndarray) -> float:
    """``sum (n - e)^2 / e`` over cells with ``e > 0``; infinite if some ``e = 0 < n``."""
    zero = expected <= 0
    if np.any(observed[zero] > 0):
        return float("inf")
    e = expected[~zero]
    return float(np.sum((observed[~zero] - e) ** 2 / e))


def gof_test(table: BinaryTable, fitted: LocalOptimum | MixtureParams, statistic: str = "deviance",
             df_convention: str = "model") -> GofResult:
    """Chi-square goodness-of-fit test of a fitted model against the saturated one.

    Parameters
    ----------
    statistic : {'deviance', 'pearson'}
    df_convention : {'model', 'cells'}
        ``'model'`` subtracts the fitted parameter count from ``2^d - 1``.
    """
    if statistic not in STATISTICS:
        raise DomainError(f"statistic must be one of {STATISTICS}")
    if df_convention not in DF_CONVENTIONS:
        raise DomainError(f"df_convention must be one of {DF_CONVENTIONS}")
    params = fitted.params if isinstance(fitted, LocalOptimum) else fitted
    e = expected_counts(table, params)
    n = table.counts
    stat = deviance(n, e) if statistic == "deviance" else pearson(n, e)
    k = _param_count(params)
    df = 2**table.d - 1 - (k if df_convention == "model" else 0)
    if df < 1:
        raise DomainError(f"non-positive degrees of freedom ({df})")
    p = 0.0 if np.isinf(stat) else float(chi2.sf(stat, df))
    return GofResult(stat, df, p, statistic, df_convention, k)


def lrt_test(table: BinaryTable, null_fit: LocalOptimum | MixtureParams,
             alt_fit: LocalOptimum | MixtureParams) -> LrtResult:
    """Likelihood-ratio test of nested fits, ``2 N (l_alt - l_null)``.

    The chi-square reference ignores the boundary issue of testing a
    mixture weight; a negative statistic signals an optimization failure.
    """
    p0 = null_fit.params if isinstance(null_fit, LocalOptimum) else null_fit
    p1 = alt_fit.params if isinstance(alt_fit, LocalOptimum) else alt_fit
    df = _param_count(p1) - _param_count(p0)
    if df < 1:
        raise DomainError("alternative must have more parameters than the null")
    stat = 2.0 * table.N * (log_likelihood_mixture(p1, table) - log_likelihood_mixture(p0, table))
    negative = stat < 0
    note = "chi-square reference; weights on the boundary under the null"
    if negative:
        note = "negative statistic: the alternative fit is worse than the null"
    p = 1.0 if stat <= 0 else float(chi2.sf(stat, df))
    return LrtResult(float(stat), df, p, bool(negative), note)


def top_expected_counts(table: BinaryTable, fits: dict[str, MixtureParams],
                        top: int = 10) -> list[dict]:
    """Observed and fitted expected counts for the ``top`` most frequent cells.

    Ties are broken by cell index so the listing is deterministic.
    """
    order = np.lexsort((np.arange(table.counts.size), -table.counts))[:top]
    expected = {name: expected_counts(table, p) for name, p in fits.items()}
    return [{"cell": cell_label(int(i), table.d), "observed": float(table.counts[i]),
             **{f"expected_{name}": float(e[i]) for name, e in expected.items()}}
            for i in order]
