"""Plain-text contingency tables.

Format: whitespace-separated counts, ``2^d`` tokens, ``#`` starts a
comment.  A file whose comments contain ``counts: real`` may hold
fractional counts (fixed ``N * p`` tables); otherwise every token must be
a nonnegative integer.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .model import BinaryTable, DimensionError, DomainError

REAL_MARKER = "counts: real"
_ORDERS = ("last", "first")


def _bit_reverse_permutation(d: int) -> np.ndarray:
    idx = np.arange(2**d)
    rev = np.zeros_like(idx)
    for v in range(d):
        rev |= ((idx >> v) & 1) << (d - 1 - v)
    return rev


def _tokens(text: str) -> tuple[list[str], bool]:
    toks, real = [], False
    for line in text.splitlines():
        body, _, comment = line.partition("#")
        if REAL_MARKER in comment:
            real = True
        toks.extend(body.split())
    return toks, real


def parse_table(text: str, d: int | None = None, order: str = "last",
                allow_real: bool | None = None) -> BinaryTable:
    """Parse a table into canonical (last variable fastest) order.

    Parameters
    ----------
    d : int, optional
        Number of variables; inferred from the token count if omitted.
    order : {'last', 'first'}
        Which variable varies fastest in ``text``.
    allow_real : bool, optional
        Accept fractional counts.  Defaults to whether the text carries
        the ``counts: real`` marker.
    """
    if order not in _ORDERS:
        raise DomainError(f"order must be one of {_ORDERS}, got {order!r}")
    toks, marked = _tokens(text)
    if allow_real is None:
        allow_real = marked
    if d is None:
        d = int(round(math.log2(len(toks)))) if toks else 0
        if d < 1 or 2**d != len(toks):
            raise DimensionError(f"{len(toks)} tokens is not a power of two")
    if len(toks) != 2**d:
        raise DimensionError(f"expected {2**d} counts for d={d}, got {len(toks)}")
    values = np.empty(len(toks))
    for i, tok in enumerate(toks):
        if allow_real:
            try:
                values[i] = float(tok)
            except ValueError:
                raise DomainError(f"token {i} ({tok!r}) is not a number") from None
        else:
            if not re.fullmatch(r"\+?\d+", tok):
                raise DomainError(f"token {i} ({tok!r}) is not a nonnegative integer")
            values[i] = int(tok)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DomainError("counts must be finite and nonnegative")
    if order == "first":
        canon = np.empty_like(values)
        canon[_bit_reverse_permutation(d)] = values
        values = canon
    return BinaryTable(d, values)


def serialize_table(table: BinaryTable, order: str = "last", per_line: int = 16,
                    header: str | None = None) -> str:
    """Inverse of :func:`parse_table`; integer tables round-trip exactly."""
    if order not in _ORDERS:
        raise DomainError(f"order must be one of {_ORDERS}, got {order!r}")
    values = table.counts
    if order == "first":
        values = values[_bit_reverse_permutation(table.d)]
    integer = table.is_integer
    toks = [str(int(v)) if integer else repr(float(v)) for v in values]
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    if not integer:
        lines.append(f"# {REAL_MARKER}")
    lines.append(f"# d={table.d} order={order}")
    lines.extend(" ".join(toks[i:i + per_line]) for i in range(0, len(toks), per_line))
    return "\n".join(lines) + "\n"


def read_table(path, d: int | None = None, order: str = "last") -> BinaryTable:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read(), d, order)
