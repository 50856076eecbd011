"""Linear extensions: enumeration, counting, uniform sampling and mean heights.

Orders are stored bottom first, so position ``0`` holds a minimal element and
its height is 1. Counting and exact mean heights run a dynamic programme over
the downsets (order ideals) of the poset, encoded as bitmasks; no extension
list is materialised for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .poset import Poset

MAX_EXACT_ELEMENTS = 20
DEFAULT_EXACT_CUTOFF = 100_000
# extension lists up to this size are cached for fast batch sampling
_LIST_CACHE_LIMIT = 5_040


class CapExceeded(Exception):
    """More linear extensions exist than the caller allowed."""

    def __init__(self, cap: int):
        super().__init__(f"more than {cap} linear extensions")
        self.cap = cap


@dataclass(frozen=True)
class HeightSummary:
    mean_height: np.ndarray
    rounded_height: np.ndarray
    exact: bool
    n_extensions_or_draws: int


def default_burn_in(m: int) -> int:
    return math.ceil(m**3 * math.log(m)) + 100 if m > 1 else 0


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


def _pred_masks(relation: np.ndarray) -> tuple[int, ...]:
    m = relation.shape[0]
    return tuple(sum(1 << i for i in range(m) if relation[i, j]) for j in range(m))


class _DownsetTable:
    """Forward/backward extension counts for every downset of a poset."""

    def __init__(self, relation: np.ndarray):
        m = relation.shape[0]
        if m > MAX_EXACT_ELEMENTS:
            raise ValueError(
                f"exact linear-extension counting supports at most {MAX_EXACT_ELEMENTS} elements, got {m}"
            )
        self.m = m
        self.pred = _pred_masks(relation)
        self.full = (1 << m) - 1
        # forward[D]: orderings of D as a bottom prefix
        forward = {0: 1}
        layer = [0]
        layers = [layer]
        for _ in range(m):
            nxt = {}
            for d in layer:
                fd = forward[d]
                for x in self.candidates(d):
                    e = d | (1 << x)
                    nxt[e] = nxt.get(e, 0) + fd
            forward.update(nxt)
            layer = sorted(nxt)
            layers.append(layer)
        # backward[D]: completions of D to a full extension
        backward = {self.full: 1}
        for layer in reversed(layers[:-1]):
            for d in layer:
                backward[d] = sum(backward[d | (1 << x)] for x in self.candidates(d))
        self.forward = forward
        self.backward = backward
        self.layers = layers

    def candidates(self, d: int) -> list[int]:
        """Elements that may be placed next on top of downset ``d``."""
        pred = self.pred
        return [x for x in range(self.m) if not (d >> x) & 1 and pred[x] & ~d == 0]

    @property
    def count(self) -> int:
        return self.backward[0]

    def height_sums(self) -> list[int]:
        sums = [0] * self.m
        for size, layer in enumerate(self.layers[:-1]):
            for d in layer:
                fd = self.forward[d]
                for x in self.candidates(d):
                    sums[x] += (size + 1) * fd * self.backward[d | (1 << x)]
        return sums

    def unrank(self, index: int) -> list[int]:
        """Extension number ``index`` in lexicographic backtracking order."""
        d, order = 0, []
        for _ in range(self.m):
            for x in self.candidates(d):
                c = self.backward[d | (1 << x)]
                if index < c:
                    break
                index -= c
            order.append(x)
            d |= 1 << x
        return order


@lru_cache(maxsize=4096)
def _table(key) -> _DownsetTable:
    return _DownsetTable(_relation_from_key(key))


@lru_cache(maxsize=4096)
def _exact_heights(key) -> tuple[int, tuple[int, ...]]:
    table = _table(key)
    return table.count, tuple(table.height_sums())


@lru_cache(maxsize=1024)
def _extension_array(key) -> np.ndarray:
    rel = _relation_from_key(key)
    out = np.array(list(_backtrack(rel, None)), dtype=np.int64)
    out.setflags(write=False)
    return out


def _relation_from_key(key) -> np.ndarray:
    m, bits = key
    raw = np.frombuffer(bits.to_bytes((m * m + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[: m * m].reshape(m, m).astype(bool)


def _uniform_below(rng: np.random.Generator, n: int) -> int:
    if n < 2**62:
        return int(rng.integers(0, n))
    bits = n.bit_length()
    while True:
        words = rng.integers(0, 2**32, size=(bits + 31) // 32, dtype=np.uint64)
        u = int.from_bytes(words.astype("<u4").tobytes(), "little") >> (32 * len(words) - bits)
        if u < n:
            return u


def _backtrack(relation: np.ndarray, cap: int | None):
    m = relation.shape[0]
    pred = _pred_masks(relation)
    order: list[int] = []
    emitted = 0

    def rec(d: int):
        nonlocal emitted
        if len(order) == m:
            emitted += 1
            if cap is not None and emitted > cap:
                raise CapExceeded(cap)
            yield list(order)
            return
        for x in range(m):
            if not (d >> x) & 1 and pred[x] & ~d == 0:
                order.append(x)
                yield from rec(d | (1 << x))
                order.pop()

    yield from rec(0)


def enumerate_extensions(p: Poset, cap: int | None = None) -> list[list[int]]:
    """All linear extensions of ``p``, bottom element first.

    Raises
    ------
    CapExceeded
        If there are more than ``cap`` extensions. No partial list is returned.
    """
    if cap is not None and cap < 1:
        raise ValueError("cap must be at least 1")
    return list(_backtrack(p.relation, cap))


def count_extensions(p: Poset) -> int:
    """Exact number of linear extensions (downset recursion, m <= 20)."""
    return _table(p.key).count


def mean_heights(
    p: Poset,
    mode: str = "exact",
    draws: int = 10_000,
    rng: np.random.Generator | int | None = None,
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF,
) -> HeightSummary:
    """Average height (1 = bottom) of every element over the linear extensions.

    ``mode="exact"`` averages over all extensions without listing them.
    ``mode="mc"`` averages over ``draws`` uniform extensions from
    :func:`sample_extensions`.
    """
    if mode == "exact":
        count, sums = _exact_heights(p.key)
        mh = np.array([s / count for s in sums])
        # round half up in exact integer arithmetic
        rounded = np.array([(2 * s + count) // (2 * count) for s in sums], dtype=np.int64)
        return HeightSummary(mh, rounded, True, count)
    if mode in ("mc", "montecarlo"):
        if draws < 1:
            raise ValueError("draws must be at least 1")
        rng = np.random.default_rng(rng)
        orders = sample_extensions(p, draws, rng, exact_cutoff=exact_cutoff)
        heights = np.empty_like(orders)
        rows = np.arange(draws)[:, None]
        heights[rows, orders] = np.arange(1, p.n_elements + 1)
        mh = heights.mean(axis=0)
        return HeightSummary(mh, round_half_up(mh), False, draws)
    raise ValueError(f"unknown mode {mode!r}")


def initial_extension(p: Poset) -> list[int]:
    """Greedy topological order choosing the lowest (indegree, index) first."""
    rel = p.relation
    indegree = rel.sum(axis=0)
    remaining = set(range(p.n_elements))
    order = []
    while remaining:
        ready = [x for x in remaining if not any(rel[y, x] for y in remaining)]
        x = min(ready, key=lambda i: (indegree[i], i))
        order.append(x)
        remaining.remove(x)
    return order


def mcmc_extensions(
    p: Poset,
    size: int,
    rng: np.random.Generator,
    burn_in: int | None = None,
) -> np.ndarray:
    """Independent draws from the lazy adjacent-transposition chain.

    Every draw starts from :func:`initial_extension` and runs ``burn_in``
    steps: with probability 1/2 stay, otherwise pick one of the ``m - 1``
    adjacent pairs uniformly and swap it unless that breaks a relation.
    """
    m = p.n_elements
    if burn_in is None:
        burn_in = default_burn_in(m)
    states = np.tile(np.asarray(initial_extension(p), dtype=np.int64), (size, 1))
    if m < 2:
        return states
    rel = p.relation
    rows = np.arange(size)
    for _ in range(burn_in):
        move = rng.random(size) < 0.5
        j = rng.integers(0, m - 1, size=size)
        lo = states[rows, j]
        hi = states[rows, j + 1]
        ok = move & ~rel[lo, hi]
        states[rows[ok], j[ok]] = hi[ok]
        states[rows[ok], j[ok] + 1] = lo[ok]
    return states


def sample_extensions(
    p: Poset,
    size: int,
    rng: np.random.Generator | int | None = None,
    method: str = "auto",
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF,
    burn_in: int | None = None,
) -> np.ndarray:
    """``size`` uniform linear extensions as a ``(size, m)`` index array.

    ``method="exact"`` draws a uniform integer below the extension count and
    unranks it through the counted recursion tree. ``method="mcmc"`` uses
    :func:`mcmc_extensions`. ``"auto"`` picks the exact path when the poset is
    small enough to count and has at most ``exact_cutoff`` extensions.
    """
    rng = np.random.default_rng(rng)
    m = p.n_elements
    if method == "auto":
        method = "mcmc"
        if m <= MAX_EXACT_ELEMENTS and count_extensions(p) <= exact_cutoff:
            method = "exact"
    if method == "mcmc":
        return mcmc_extensions(p, size, rng, burn_in)
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    key = p.key
    count = _table(key).count
    if count <= _LIST_CACHE_LIMIT:
        return _extension_array(key)[rng.integers(0, count, size=size)].copy()
    table = _table(key)
    return np.array([table.unrank(_uniform_below(rng, count)) for _ in range(size)], dtype=np.int64)


def sample_extension(p: Poset, rng=None, **kwargs) -> list[int]:
    """A single uniform linear extension, bottom first."""
    return sample_extensions(p, 1, rng, **kwargs)[0].tolist()


def extension_array(p: Poset) -> np.ndarray:
    """All extensions as a read-only ``(count, m)`` array in backtracking order."""
    return _extension_array(p.key)


def exact_height_table(key) -> tuple[int, tuple[int, ...]]:
    """Cached ``(count, height_sums)`` for a relation key; see :attr:`Poset.key`."""
    return _exact_heights(key)


def extension_array_for_key(key) -> np.ndarray:
    return _extension_array(key)
