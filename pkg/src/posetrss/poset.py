"""Dominance posets over multivariate element sets.

Elements are compared componentwise. ``a`` lies below ``b`` when every
coordinate of ``a`` is at most the matching coordinate of ``b`` and the two
vectors differ. Exact duplicates are left incomparable so that linear
extensions order them freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Ordering(enum.Enum):
    BELOW = "below"
    ABOVE = "above"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


class PosetError(ValueError):
    """Raised for malformed element sets, masks or relations."""


def compare(a: Sequence[float], b: Sequence[float]) -> Ordering:
    """Componentwise comparison of two element vectors.

    Examples
    --------
    >>> compare((0, 1), (3, 3))
    <Ordering.BELOW: 'below'>
    >>> compare((0, 4), (3, 3))
    <Ordering.INCOMPARABLE: 'incomparable'>
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise PosetError(f"dimension mismatch: {a.shape} vs {b.shape}")
    le = bool(np.all(a <= b))
    ge = bool(np.all(a >= b))
    if le and ge:
        return Ordering.EQUAL
    if le:
        return Ordering.BELOW
    if ge:
        return Ordering.ABOVE
    return Ordering.INCOMPARABLE


@dataclass(frozen=True)
class SetOfElements:
    """``m`` element vectors of common length ``R`` with distinct labels."""

    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise PosetError("element set must be a 2-d array (m x R)")
        m, r = values.shape
        if m < 2:
            raise PosetError(f"a set needs at least 2 elements, got {m}")
        if r < 1:
            raise PosetError("elements need at least one variable")
        if not np.all(np.isfinite(values)):
            raise PosetError("element values must be finite")
        labels = tuple(self.labels) if len(self.labels) else tuple(range(m))
        if len(labels) != m or len(set(labels)) != m:
            raise PosetError("labels must be m distinct identifiers")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]


def _check_mask(flips, r: int) -> np.ndarray:
    if flips is None:
        return np.zeros(r, dtype=bool)
    flips = np.asarray(flips, dtype=bool)
    if flips.shape != (r,):
        raise PosetError(f"sign-flip mask has length {flips.size}, expected {r}")
    return flips


def apply_flips(values: np.ndarray, flips) -> np.ndarray:
    """Comparison view of ``values`` with masked columns negated."""
    values = np.asarray(values, dtype=float)
    flips = _check_mask(flips, values.shape[-1])
    return np.where(flips, -values, values)


def dominance(values: np.ndarray) -> np.ndarray:
    """Strict dominance tensor for one or many sets.

    ``values`` has shape ``(..., m, R)``; the result has shape ``(..., m, m)``
    with ``out[..., i, j]`` true when element ``i`` lies strictly below ``j``.
    """
    values = np.asarray(values, dtype=float)
    a = values[..., :, None, :]
    b = values[..., None, :, :]
    le = np.all(a <= b, axis=-1)
    lt = np.any(a < b, axis=-1)
    return le & lt


def transitive_reduction(relation: np.ndarray) -> list[tuple[int, int]]:
    """Cover edges of a strict, transitive relation."""
    relation = np.asarray(relation, dtype=bool)
    # (i, j) is covered unless some k sits strictly between them
    through = (relation.astype(np.int64) @ relation.astype(np.int64)) > 0
    cover = relation & ~through
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(cover))]


@dataclass(frozen=True)
class Poset:
    """Strict partial order on ``n_elements`` indices.

    ``relation[i, j]`` is true when ``i`` lies strictly below ``j``.
    """

    relation: np.ndarray
    labels: tuple = ()
    cover_edges: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        rel = np.array(self.relation, dtype=bool)
        if rel.ndim != 2 or rel.shape[0] != rel.shape[1]:
            raise PosetError("relation must be a square matrix")
        if np.any(np.diag(rel)):
            raise PosetError("relation must be irreflexive")
        if np.any(rel & rel.T):
            raise PosetError("relation must be antisymmetric")
        closure = (rel.astype(np.int64) @ rel.astype(np.int64)) > 0
        if np.any(closure & ~rel):
            raise PosetError("relation is not transitive")
        rel.setflags(write=False)
        n = rel.shape[0]
        labels = tuple(self.labels) if len(self.labels) else tuple(range(n))
        if len(labels) != n:
            raise PosetError("one label per element required")
        object.__setattr__(self, "relation", rel)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "cover_edges", transitive_reduction(rel))

    @property
    def n_elements(self) -> int:
        return self.relation.shape[0]

    @property
    def key(self) -> tuple[int, int]:
        """Hashable encoding ``(m, bits)`` of the relation, row-major."""
        return relation_key(self.relation)

    def predecessor_masks(self) -> list[int]:
        """Bitmask of the elements strictly below each element."""
        rel = self.relation
        return [sum(1 << i for i in np.flatnonzero(rel[:, j])) for j in range(self.n_elements)]

    def is_order_preserving(self, order: Sequence[int]) -> bool:
        """True when ``order`` (bottom first) is a linear extension."""
        order = list(order)
        n = self.n_elements
        if sorted(order) != list(range(n)):
            return False
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(n)
        i, j = np.nonzero(self.relation)
        return bool(np.all(pos[i] < pos[j]))

    @classmethod
    def chain(cls, m: int) -> "Poset":
        idx = np.arange(m)
        return cls(idx[:, None] < idx[None, :])

    @classmethod
    def antichain(cls, m: int) -> "Poset":
        return cls(np.zeros((m, m), dtype=bool))


def relation_key(relation: np.ndarray) -> tuple[int, int]:
    rel = np.asarray(relation, dtype=bool)
    m = rel.shape[0]
    bits = np.packbits(rel.ravel(), bitorder="little")
    return m, int.from_bytes(bits.tobytes(), "little")


def build_poset(elements, flips=None, labels=()) -> Poset:
    """Dominance poset of a set of elements after optional sign flips.

    Parameters
    ----------
    elements : SetOfElements or array_like, shape (m, R)
    flips : array_like of bool, shape (R,), optional
        Variables to negate before comparing. The stored values are untouched.
    labels : sequence, optional
        Element labels; taken from ``elements`` when it is a ``SetOfElements``.
    """
    if not isinstance(elements, SetOfElements):
        elements = SetOfElements(np.asarray(elements, dtype=float), labels)
    view = apply_flips(elements.values, flips)
    return Poset(dominance(view), labels=elements.labels)


def pairwise_correlations(data, names: Sequence[str] | None = None) -> np.ndarray:
    """Pearson correlation matrix of the columns of an ``N x R`` array."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise PosetError("data must be a 2-d array")
    n, r = data.shape
    if n < 3:
        raise PosetError(f"need at least 3 rows for correlations, got {n}")
    centered = data - data.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    for j in range(r):
        if ss[j] <= 0.0:
            name = names[j] if names is not None else j
            raise PosetError(f"column {name!r} is constant")
    corr = (centered.T @ centered) / np.sqrt(np.outer(ss, ss))
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def _nonnegative_pairs(corr: np.ndarray, flips: np.ndarray) -> int:
    s = np.where(flips, -1.0, 1.0)
    signed = corr * np.outer(s, s)
    iu = np.triu_indices(corr.shape[0], k=1)
    return int(np.count_nonzero(signed[iu] >= 0.0))


def suggest_sign_flips(corr) -> np.ndarray:
    """Greedy mask making as many pairwise correlations non-negative as possible.

    Starting from no flips, the variable whose flip gains the most
    non-negative pairs is flipped (lowest index on ties) until no flip helps.
    Negating every variable leaves all correlation signs unchanged, so the
    result is normalised to keep the first variable in its original
    orientation.
    """
    corr = np.asarray(corr, dtype=float)
    r = corr.shape[0]
    if corr.shape != (r, r):
        raise PosetError("correlation matrix must be square")
    flips = np.zeros(r, dtype=bool)
    score = _nonnegative_pairs(corr, flips)
    while True:
        best_gain, best_j = 0, -1
        for j in range(r):
            trial = flips.copy()
            trial[j] = ~trial[j]
            gain = _nonnegative_pairs(corr, trial) - score
            if gain > best_gain:
                best_gain, best_j = gain, j
        if best_j < 0:
            break
        flips[best_j] = ~flips[best_j]
        score += best_gain
    if flips[0]:
        flips = ~flips
    return flips
