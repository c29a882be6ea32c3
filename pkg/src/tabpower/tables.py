"""Contingency-table types, MLE and the three independence statistics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import unbiased_from_parts

PROB_TOL = 1e-12
MARGIN_TOL = 1e-10


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a formula."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointTable:
    """An ``I x J`` matrix of cell probabilities.

    Tables with a zero row or column marginal are allowed (an MLE can
    produce one) but are flagged by :attr:`has_zero_marginal`; every
    formula that divides by a marginal rejects them.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2 or p.shape[0] < 2 or p.shape[1] < 2:
            raise DomainError(f"probability table must be I x J with I, J >= 2, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_marginals(cls, row_marginals, col_marginals) -> JointTable:
        """The independence table ``outer(row, col)``."""
        return cls(np.outer(row_marginals, col_marginals))

    @property
    def I(self) -> int:  # noqa: E743
        return self.probs.shape[0]

    @property
    def J(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @property
    def row_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    @property
    def has_zero_marginal(self) -> bool:
        return bool(np.any(self.row_marginals <= 0) or np.any(self.col_marginals <= 0))

    def product_table(self) -> JointTable:
        """Independence table with the same marginals."""
        return JointTable.from_marginals(self.row_marginals, self.col_marginals)

    def is_independent(self, tol: float = MARGIN_TOL) -> bool:
        return bool(np.max(np.abs(self.probs - np.outer(self.row_marginals, self.col_marginals))) <= tol)

    def __eq__(self, other):
        return isinstance(other, JointTable) and np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CountTable:
    """An ``I x J`` matrix of nonnegative integer counts."""

    counts: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.counts)
        c = _frozen(raw, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] < 2:
            raise DomainError(f"count table must be I x J with I, J >= 2, got shape {c.shape}")
        if not np.array_equal(c, raw):
            raise DomainError("counts must be integers")
        if np.any(c < 0):
            raise DomainError("counts must be nonnegative")
        if c.sum() < 1:
            raise DomainError("a count table needs n >= 1")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def __eq__(self, other):
        return isinstance(other, CountTable) and np.array_equal(self.counts, other.counts)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AlternativeSpec:
    """Joint table written as ``outer(row, col) + c``.

    ``c`` must have zero row and column sums so that ``row`` and ``col``
    remain the marginals of the induced table.
    """

    row_marginals: np.ndarray
    col_marginals: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        r = _frozen(self.row_marginals)
        s = _frozen(self.col_marginals)
        c = _frozen(self.c)
        if c.shape != (r.size, s.size):
            raise DomainError(f"c has shape {c.shape}, expected {(r.size, s.size)}")
        if abs(c.sum()) > PROB_TOL:
            raise DomainError(f"perturbation c sums to {c.sum()!r}, not 0")
        if np.max(np.abs(c.sum(axis=1))) > MARGIN_TOL or np.max(np.abs(c.sum(axis=0))) > MARGIN_TOL:
            raise DomainError("perturbation c must have zero row and column sums")
        probs = np.outer(r, s) + c
        if np.any(probs < 0):
            i, j = np.unravel_index(np.argmin(probs), probs.shape)
            raise DomainError(f"induced probability at cell ({i + 1}, {j + 1}) is negative")
        object.__setattr__(self, "row_marginals", r)
        object.__setattr__(self, "col_marginals", s)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_table(cls, table: JointTable) -> AlternativeSpec:
        r = table.row_marginals
        s = table.col_marginals
        return cls(r, s, table.probs - np.outer(r, s))

    @property
    def table(self) -> JointTable:
        return JointTable(np.outer(self.row_marginals, self.col_marginals) + self.c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.c.shape

    @property
    def is_null(self) -> bool:
        """True when ``c`` vanishes up to floating-point rounding of the cells."""
        return float(np.max(np.abs(self.c))) <= PROB_TOL


# ---------------------------------------------------------------------------
# Estimation and statistics
# ---------------------------------------------------------------------------


def mle_table(counts: CountTable) -> JointTable:
    """Cell proportions ``n_ij / n``."""
    return JointTable(counts.counts / counts.n)


def _require_positive_marginals(table: JointTable):
    r = table.row_marginals
    s = table.col_marginals
    if np.any(r <= 0):
        raise DomainError(f"row marginal {int(np.argmin(r)) + 1} is zero")
    if np.any(s <= 0):
        raise DomainError(f"column marginal {int(np.argmin(s)) + 1} is zero")
    return r, s


def pearson_functional(table: JointTable) -> float:
    r, s = _require_positive_marginals(table)
    e = np.outer(r, s)
    return float(((table.probs - e) ** 2 / e).sum())


def dcov_functional(table: JointTable) -> float:
    e = np.outer(table.row_marginals, table.col_marginals)
    return float(((table.probs - e) ** 2).sum())


def stat_pearson(counts: CountTable) -> float:
    """Pearson statistic on the proportion scale; ``n`` times it is the usual chi-square."""
    return pearson_functional(mle_table(counts))


def stat_dcov_mle(counts: CountTable) -> float:
    return dcov_functional(mle_table(counts))


def dcov_unbiased_from_probs(probs, n) -> float:
    """Unbiased squared distance covariance from cell proportions and ``n``.

    ``probs`` need not come from integer counts, which lets the closed
    form be evaluated at ``probs = pi`` for arbitrary ``n``.
    """
    if n <= 3:
        raise DomainError(f"the unbiased statistic needs n >= 4, got n={n}")
    P = np.asarray(probs, dtype=np.float64)
    r = P.sum(axis=1)
    s = P.sum(axis=0)
    e = np.outer(r, s)
    dhat = float(((P - e) ** 2).sum())
    return float(unbiased_from_parts(dhat, float((P * e).sum()), float(r @ r), float(s @ s), float(n)))


def stat_dcov_unbiased(counts: CountTable) -> float:
    return dcov_unbiased_from_probs(counts.counts / counts.n, counts.n)


def scaled_mle_unbiased_gap(table: JointTable, n) -> float:
    """``n * (Dhat - Dtilde)`` with the sample proportions fixed at ``table``."""
    return float(n) * (dcov_functional(table) - dcov_unbiased_from_probs(table.probs, n))


def lemma1_constant(table: JointTable) -> float:
    """Almost-sure limit of ``n * (Dhat_n - Dtilde_n)``.

    Reduces to ``(1 - sum r^2) * (1 - sum s^2)`` for an independence table.
    """
    p = table.probs
    r = table.row_marginals
    s = table.col_marginals
    A = float(r @ r)
    B = float(s @ s)
    return float(1.0 - A - B - 3.0 * A * B + 4.0 * (p * np.outer(r, s)).sum() - 3.0 * dcov_functional(table))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _cells(table):
    if isinstance(table, JointTable):
        return table.probs
    if isinstance(table, CountTable):
        return table.counts
    raise TypeError(f"expected JointTable or CountTable, got {type(table).__name__}")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def table_to_json(table) -> str:
    cells = _cells(table)
    data = {
        "I": int(cells.shape[0]),
        "J": int(cells.shape[1]),
        "cells": [[int(v) if cells.dtype.kind == "i" else float(v) for v in row] for row in cells],
    }
    return json.dumps(data)


def _build(cells, kind):
    if kind == "joint":
        return JointTable(np.asarray(cells, dtype=np.float64))
    if kind == "counts":
        return CountTable(np.asarray(cells))
    raise ValueError(f"unknown table kind {kind!r}")


def table_from_json(text: str, kind: str = "joint"):
    """Parse ``{"I": .., "J": .., "cells": [[..]]}``; ``kind`` is ``"joint"`` or ``"counts"``."""
    data = json.loads(text)
    cells = data["cells"]
    if len(cells) != data["I"] or any(len(row) != data["J"] for row in cells):
        raise DomainError("cells do not match the declared I x J shape")
    return _build(cells, kind)


def table_to_csv(table, header: bool = False) -> str:
    cells = _cells(table)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow([f"col{j + 1}" for j in range(cells.shape[1])])
    for row in cells:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def table_from_csv(text: str, kind: str = "joint"):
    """Row-major CSV; a non-numeric first row is treated as a header."""
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(f.strip() for f in row)]
    if not rows:
        raise DomainError("empty table file")
    try:
        [float(f) for f in rows[0]]
    except ValueError:
        rows = rows[1:]
    if kind == "counts":
        cells = [[int(f) for f in row] for row in rows]
    else:
        cells = [[float(f) for f in row] for row in rows]
    if len({len(row) for row in cells}) != 1:
        raise DomainError("ragged table")
    return _build(cells, kind)


def read_table(path, kind: str = "joint"):
    """Load a table from ``.json`` or ``.csv`` (by extension)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return table_from_json(text, kind)
    return table_from_csv(text, kind)
