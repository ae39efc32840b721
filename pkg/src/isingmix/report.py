"""Structured reports and DOT graphs of posterior inclusion probabilities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import DomainError, pair_list
from .sampler import PosteriorSummary

DEFAULT_TAU = 0.5


def _check_tau(tau: float) -> None:
    if not 0 < tau < 1:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")


def _check_component(summary: PosteriorSummary, component: int) -> None:
    if not 0 <= component < summary.K:
        raise IndexError(f"component {component} out of range for K={summary.K}")


def significant_edges(summary: PosteriorSummary, component: int = 0,
                      tau: float = DEFAULT_TAU) -> list[tuple[int, int, float]]:
    """One-based pairs with ``gamma_mean > tau`` and their means, in storage order."""
    _check_tau(tau)
    _check_component(summary, component)
    g = summary.gamma_mean[component]
    return [(a + 1, b + 1, float(g[s])) for s, (a, b) in enumerate(pair_list(summary.d))
            if g[s] > tau]


def export_graph(summary: PosteriorSummary, component: int = 0, tau: float = DEFAULT_TAU) -> str:
    """Undirected DOT graph of the significant edges of one component.

    Every variable appears as a vertex; edge labels are posterior means
    to two decimals.
    """
    edges = significant_edges(summary, component, tau)
    lines = ["graph {"]
    lines.extend(f"  {v};" for v in range(1, summary.d + 1))
    lines.extend(f'  {a} -- {b} [label="{g:.2f}"];' for a, b, g in edges)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan
        return v if np.isfinite(v) else str(v)
    return obj


@dataclass
class AnalysisReport:
    """Everything one CLI run produces, serialized as a single JSON document."""

    command: str
    input: dict
    settings: dict
    posterior: dict | None = None
    significant_edges: list | None = None
    gof: dict = field(default_factory=dict)
    lrt: dict | None = None
    expected_counts: list | None = None
    identifiability: dict | None = None
    notes: list = field(default_factory=list)

    @classmethod
    def from_summary(cls, command: str, input: dict, settings: dict,
                     summary: PosteriorSummary, tau: float = DEFAULT_TAU) -> "AnalysisReport":
        edges = [[{"pair": [a, b], "gamma_mean": g} for a, b, g in
                  significant_edges(summary, k, tau)] for k in range(summary.K)]
        return cls(command, input, {**settings, "tau": tau}, summary.to_dict(), edges,
                   notes=list(summary.warnings))

    def to_dict(self) -> dict:
        out = {"command": self.command, "input": self.input, "settings": self.settings,
               "posterior": self.posterior, "significant_edges": self.significant_edges,
               "gof": self.gof, "lrt": self.lrt, "expected_counts": self.expected_counts,
               "identifiability": self.identifiability, "notes": self.notes}
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
