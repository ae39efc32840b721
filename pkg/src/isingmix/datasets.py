"""Bundled 2^8 tables and the four simulation designs."""

from __future__ import annotations

import numpy as np

from .model import BinaryTable, IsingParams, MixtureParams, mixture_cell_probabilities

# Rows of 16, variable 8 varying fastest.
_ROCHDALE = """
5 0 2 1 5 1 0 0 4 1 0 0 6 0 2 0
8 0 11 0 13 0 1 0 3 0 1 0 26 0 1 0
5 0 2 0 0 0 0 0 0 0 0 0 0 0 1 0
4 0 8 2 6 0 1 0 1 0 1 0 0 0 1 0
17 10 1 1 16 7 0 0 0 2 0 0 10 6 0 0
1 0 2 0 0 0 0 0 1 0 0 0 0 0 0 0
4 7 3 1 1 1 2 0 1 0 0 0 1 0 0 0
0 0 3 0 0 0 0 0 0 0 0 0 0 0 0 0
18 3 2 0 23 4 0 0 22 2 0 0 57 3 0 0
5 1 0 0 11 0 1 0 11 0 0 0 29 2 1 1
3 0 0 0 4 0 0 0 1 0 0 0 0 0 0 0
1 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0
41 25 0 1 37 26 0 0 15 10 0 0 43 22 0 0
0 0 0 0 2 0 0 0 0 0 0 0 3 0 0 0
2 4 0 0 2 1 0 0 0 1 0 0 2 1 0 0
0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0
"""

_NLTCS = """
4419 97 67 472 2063 55 335 44 313 18 33 76 1 5 2 6
119 115 1 16 0 4 1189 17 112 6 130 64 529 52 453 56
2 22 13 116 10 67 47 0 2 0 1 92 0 4 0 4
1 12 5 19 1 0 0 3 1 0 354 2 27 4 16 5
55 3 24 1 0 0 1 7 1 60 667 29 601 14 1 16
3 55 8 85 7 65 69 400 24 5 62 2 10 164 0 8
2 6 3 15 3 5 0 0 0 0 0 0 3 32 4 41
1 0 1 0 1 0 4 1 3 3 9 0 0 0 0 0
14 226 11 140 5 0 2 2 10 0 7 3 3 11 31 3
0 4 0 2 125 8 134 81 654 34 0 34 1 5 25 215
8 80 30 5 105 19 50 1 1 0 2 3 0 3 0 3
13 9 4 1 0 0 4 7 1 6 6 54 3 0 1 0
0 1 6 0 6 1 42 3 28 48 207 12 0 5 0 2
4 34 1 13 6 38 549 19 180 21 196 27 2 14 72 88
8 3 0 0 2 8 11 3 15 9 5 19 3 26 0 28
29 158 10 89 5 66 764 66 86 8 175 7 151 131 516 1056
"""

_CHECKSUMS = {"rochdale": 665, "nltcs": 21574}

# Edge set (one-based) of the published stepwise-BIC graph for NLTCS: the
# 21 Ising edges minus (1, 4).
NLTCS_STEPWISE_EDGES = frozenset({
    (1, 2), (1, 3), (1, 7), (2, 3), (2, 4), (2, 6), (2, 7), (3, 4), (3, 6), (3, 8),
    (4, 5), (4, 6), (4, 7), (4, 8), (5, 6), (5, 7), (5, 8), (6, 7), (6, 8), (7, 8),
})

# One-based edges of the published Whittaker (1990) Rochdale graph: the 16
# Ising edges minus (2, 7) and (5, 7).
ROCHDALE_WHITTAKER_EDGES = frozenset({
    (1, 3), (1, 4), (1, 5), (1, 7), (2, 4), (2, 5), (2, 8), (3, 5), (3, 6), (3, 7),
    (4, 7), (4, 8), (5, 6), (6, 7),
})


def _parse(text: str) -> np.ndarray:
    return np.array([int(tok) for tok in text.split()], dtype=float)


def builtin_dataset(name: str) -> BinaryTable:
    """The Rochdale (N=665) or NLTCS (N=21574) table in canonical order."""
    key = name.lower()
    if key == "rochdale":
        counts = _parse(_ROCHDALE)
    elif key == "nltcs":
        counts = _parse(_NLTCS)
    else:
        raise KeyError(f"unknown dataset {name!r}; choose 'rochdale' or 'nltcs'")
    table = BinaryTable(8, counts)
    if table.N != _CHECKSUMS[key]:
        raise AssertionError(f"{key} checksum failed: N={table.N}")
    return table


DESIGN_MAIN = (1.0, -1.0, 1.0, -1.0, 1.0, -1.0)

_DESIGNS = {
    "A": [{(1, 2): 1.0, (1, 3): -1.0, (1, 4): 1.0, (2, 3): -1.0}],
    "B": [{(1, 2): 1.0, (1, 3): -0.5, (1, 4): 0.2, (2, 3): -0.1}],
    "C": [{(1, 2): 1.0, (1, 3): -1.0}, {(4, 6): 1.0, (5, 6): -1.0}],
    "D": [{(1, 2): 1.0, (1, 3): -1.0, (2, 3): 1.0}, {(1, 4): 1.0, (1, 5): -1.0}],
}


def design_truth(name: str) -> MixtureParams:
    key = name.upper()
    if key not in _DESIGNS:
        raise KeyError(f"unknown design {name!r}; choose A, B, C or D")
    comps = tuple(IsingParams.from_pairs(6, pairs, DESIGN_MAIN) for pairs in _DESIGNS[key])
    weights = np.array([1.0]) if len(comps) == 1 else np.array([0.4, 0.6])
    return MixtureParams(weights, comps, shared_main=True)


def simulate_design(name: str, N: float = 10_000, sampled: bool = False,
                    rng_seed: int | None = None) -> tuple[BinaryTable, MixtureParams]:
    """Table and truth for a simulation design.

    With ``sampled=False`` the table is the fixed, real-valued ``N * p``;
    otherwise a multinomial draw of size ``N``.
    """
    truth = design_truth(name)
    p = mixture_cell_probabilities(truth)
    if sampled:
        rng = np.random.default_rng(rng_seed)
        counts = rng.multinomial(int(N), p).astype(float)
    else:
        counts = N * p
    return BinaryTable(6, counts), truth
