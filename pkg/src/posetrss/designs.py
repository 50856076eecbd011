"""Stratified populations for MVSR, CPOR and RPOR, and within-stratum SRSWOR.

Every design reduces to a stratum assignment: for each set ``i`` and element
``e`` a stratum index. MVSR and RPOR assign a permutation per set (equal
strata of size ``K``); CPOR assigns rounded mean heights (unequal strata).

The ``*_assignment`` kernels work on a leading batch axis so the simulation
engine can process many replications at once; the ``build_*`` functions wrap
them for a single population.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import linext
from .poset import Poset, apply_flips, dominance

DESIGNS = ("MVSR", "CPOR", "RPOR")


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignConfig:
    """Parameters of one design build.

    ``n`` is the per-stratum sample size for MVSR/RPOR; CPOR spends the same
    total budget ``n * m`` across its unequal strata.
    """

    m: int
    K: int
    n: int
    design_kind: str = "RPOR"
    ranking_columns: tuple = (0,)
    target_columns: tuple = (0,)
    sign_flips: tuple | None = None
    seed: int | None = None
    exact_cutoff: int = linext.DEFAULT_EXACT_CUTOFF
    mc_height_draws: int = 2_000

    def __post_init__(self):
        kind = self.design_kind.upper()
        if kind not in DESIGNS:
            raise DesignError(f"unknown design {self.design_kind!r}")
        object.__setattr__(self, "design_kind", kind)
        object.__setattr__(self, "ranking_columns", tuple(int(c) for c in self.ranking_columns))
        object.__setattr__(self, "target_columns", tuple(int(c) for c in self.target_columns))
        if self.m < 2:
            raise DesignError("m must be at least 2")
        if not 1 <= self.n < self.K:
            raise DesignError(f"need 1 <= n < K, got n={self.n}, K={self.K}")
        if not self.ranking_columns:
            raise DesignError("at least one ranking column is required")
        if not self.target_columns:
            raise DesignError("at least one target column is required")
        if self.sign_flips is not None:
            flips = tuple(bool(f) for f in self.sign_flips)
            if len(flips) != len(self.ranking_columns):
                raise DesignError("sign_flips needs one entry per ranking column")
            object.__setattr__(self, "sign_flips", flips)

    @property
    def total(self) -> int:
        return self.n * self.m

    def rng(self) -> np.random.Generator:
        if self.seed is None:
            raise DesignError("a seed is required")
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class RankedRecord:
    values: np.ndarray
    ranking_values: np.ndarray
    target_values: np.ndarray
    set_index: int
    stratum: int
    mean_height: float | None = None


@dataclass(frozen=True)
class Allocation:
    n_h: np.ndarray

    @property
    def total(self) -> int:
        return int(self.n_h.sum())


@dataclass
class StratifiedPopulation:
    """Records of ``K`` sets of ``m`` elements placed into ``m`` strata.

    Rows are ordered by stratum, then set, then element position in the set.
    ``stratum`` and ``set_index`` are 1-based.
    """

    design_kind: str
    m: int
    K: int
    values: np.ndarray
    stratum: np.ndarray
    set_index: np.ndarray
    element: np.ndarray
    ranking_columns: tuple
    target_columns: tuple
    mean_height: np.ndarray | None = None
    height_exact: np.ndarray | None = None
    stratum_sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.stratum_sizes = np.bincount(self.stratum - 1, minlength=self.m).astype(np.int64)

    @property
    def strata(self) -> list[np.ndarray]:
        """Row indices of each stratum."""
        return [np.flatnonzero(self.stratum == h) for h in range(1, self.m + 1)]

    @property
    def targets(self) -> np.ndarray:
        return self.values[:, list(self.target_columns)]

    @property
    def weights(self) -> np.ndarray:
        return self.stratum_sizes / (self.K * self.m)

    def records(self) -> list[RankedRecord]:
        rank = self.values[:, list(self.ranking_columns)]
        tgt = self.targets
        mh = self.mean_height
        return [
            RankedRecord(
                self.values[r],
                rank[r],
                tgt[r],
                int(self.set_index[r]),
                int(self.stratum[r]),
                None if mh is None else float(mh[r]),
            )
            for r in range(self.values.shape[0])
        ]


def _as_sets(sets) -> np.ndarray:
    arr = np.asarray(sets, dtype=float)
    if arr.ndim != 3:
        raise DesignError("sets must have shape (K, m, R)")
    if not np.all(np.isfinite(arr)):
        raise DesignError("set values must be finite")
    return arr


def _check_sets(arr: np.ndarray, cfg: DesignConfig) -> None:
    K, m, r = arr.shape
    if (K, m) != (cfg.K, cfg.m):
        raise DesignError(f"expected {cfg.K} sets of {cfg.m} elements, got {K} of {m}")
    cols = cfg.ranking_columns + cfg.target_columns
    if max(cols) >= r or min(cols) < 0:
        raise DesignError(f"column index out of range for {r} variables")


def _population(kind, sets, strata, cfg, mean_height=None, height_exact=None) -> StratifiedPopulation:
    K, m, _ = sets.shape
    set_idx = np.repeat(np.arange(1, K + 1), m)
    elem = np.tile(np.arange(m), K)
    flat_stratum = strata.reshape(-1) + 1
    order = np.lexsort((elem, set_idx, flat_stratum))
    mh = None if mean_height is None else mean_height.reshape(-1)[order]
    exact = None if height_exact is None else np.repeat(height_exact, m)[order]
    return StratifiedPopulation(
        kind,
        m,
        K,
        sets.reshape(K * m, -1)[order],
        flat_stratum[order],
        set_idx[order],
        elem[order],
        cfg.ranking_columns,
        cfg.target_columns,
        mh,
        exact,
    )


def _ranking_view(sets: np.ndarray, cfg: DesignConfig) -> np.ndarray:
    view = sets[..., list(cfg.ranking_columns)]
    if cfg.sign_flips is not None:
        view = apply_flips(view, cfg.sign_flips)
    return view


# batch kernels ---------------------------------------------------------------


def mvsr_assignment(rank_values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stratum (0-based) of each element when sorting every set ascending.

    ``rank_values`` has shape ``(..., m)``. Ties are broken by independent
    uniform keys, so tied elements take either order with equal probability.
    """
    rank_values = np.asarray(rank_values, dtype=float)
    ties = rng.random(rank_values.shape)
    order = np.lexsort((ties, rank_values), axis=-1)
    return np.argsort(order, axis=-1)


def _set_keys(rel: np.ndarray) -> list:
    """Relation keys for a batch of ``(..., m, m)`` relation matrices."""
    m = rel.shape[-1]
    flat = rel.reshape(-1, m * m)
    packed = np.packbits(flat, axis=-1, bitorder="little")
    if m * m <= 64:
        pad = np.zeros((packed.shape[0], 8), dtype=np.uint8)
        pad[:, : packed.shape[1]] = packed
        return pad.view("<u8").ravel()
    return np.array([int.from_bytes(row.tobytes(), "little") for row in packed], dtype=object)


@lru_cache(maxsize=4096)
def _height_entry(key) -> tuple[int, np.ndarray, np.ndarray]:
    count, sums = linext.exact_height_table(key)
    mh = np.array([s / count for s in sums])
    rounded = np.array([(2 * s + count) // (2 * count) for s in sums], dtype=np.int64)
    return count, mh, rounded


def _unique_posets(view: np.ndarray):
    m = view.shape[-2]
    rel = dominance(view)
    flat_rel = rel.reshape(-1, m, m)
    keys = _set_keys(rel)
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    return m, flat_rel, [(m, int(k)) for k in uniq], first, inverse.ravel()


def rpor_assignment(
    view: np.ndarray,
    rng: np.random.Generator,
    exact_cutoff: int = linext.DEFAULT_EXACT_CUTOFF,
    burn_in: int | None = None,
) -> np.ndarray:
    """Stratum of each element under one uniform linear extension per set.

    ``view`` holds the (sign-flipped) ranking variables, shape ``(..., m, R)``.
    """
    batch_shape = view.shape[:-2]
    m, flat_rel, keys, first, inverse = _unique_posets(view)
    n_sets = flat_rel.shape[0]
    exact = m <= linext.MAX_EXACT_ELEMENTS
    counts = np.array([linext.count_extensions(Poset(flat_rel[f])) if exact else 0 for f in first], dtype=object)
    use_exact = np.array([exact and c <= exact_cutoff for c in counts], dtype=bool)
    small = np.array([u and c <= linext._LIST_CACHE_LIMIT for u, c in zip(use_exact, counts)], dtype=bool)
    set_counts = np.where(small[inverse], counts[inverse], 1).astype(np.int64)
    idx = rng.integers(0, set_counts)
    orders = np.empty((n_sets, m), dtype=np.int64)
    for u, key in enumerate(keys):
        members = np.flatnonzero(inverse == u)
        if small[u]:
            orders[members] = linext.extension_array_for_key(key)[idx[members]]
            continue
        p = Poset(flat_rel[first[u]])
        method = "exact" if use_exact[u] else "mcmc"
        orders[members] = linext.sample_extensions(p, members.size, rng, method=method, burn_in=burn_in)
    assign = np.empty_like(orders)
    np.put_along_axis(assign, orders, np.broadcast_to(np.arange(m), orders.shape), axis=-1)
    return assign.reshape(*batch_shape, m)


def cpor_assignment(
    view: np.ndarray,
    rng: np.random.Generator | None = None,
    exact_cutoff: int = linext.DEFAULT_EXACT_CUTOFF,
    mc_draws: int = 2_000,
):
    """Rounded mean height (0-based stratum) of each element of each set.

    Returns ``(strata, mean_heights, exact)`` where ``exact`` flags, per set,
    whether heights were averaged over all extensions or estimated by Monte
    Carlo because the poset had more than ``exact_cutoff`` extensions.
    """
    batch_shape = view.shape[:-2]
    m, flat_rel, keys, first, inverse = _unique_posets(view)
    n_u = len(keys)
    mh = np.empty((n_u, m))
    rounded = np.empty((n_u, m), dtype=np.int64)
    exact = np.ones(n_u, dtype=bool)
    for u, key in enumerate(keys):
        if m <= linext.MAX_EXACT_ELEMENTS and linext.count_extensions(Poset(flat_rel[first[u]])) <= exact_cutoff:
            _, mh[u], rounded[u] = _height_entry(key)
            continue
        if rng is None:
            raise DesignError("Monte Carlo mean heights need a random generator")
        summary = linext.mean_heights(Poset(flat_rel[first[u]]), "mc", draws=mc_draws, rng=rng)
        mh[u], rounded[u], exact[u] = summary.mean_height, summary.rounded_height, False
    strata = (rounded[inverse] - 1).reshape(*batch_shape, m)
    return strata, mh[inverse].reshape(*batch_shape, m), exact[inverse].reshape(batch_shape)


def select_within_strata(strata: np.ndarray, n_h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """SRSWOR inside every stratum, batched.

    ``strata`` has shape ``(B, N)`` with 0-based stratum ids and ``n_h`` shape
    ``(B, m)``. Returns a boolean ``(B, N)`` selection mask: within stratum
    ``h`` a uniformly random ``n_h`` subset is selected.
    """
    strata = np.asarray(strata)
    B, N = strata.shape
    keys = rng.random((B, N))
    order = np.lexsort((keys, strata), axis=-1)
    sorted_strata = np.take_along_axis(strata, order, axis=-1)
    m = n_h.shape[1]
    sizes = np.stack([np.count_nonzero(strata == h, axis=1) for h in range(m)], axis=1)
    starts = np.cumsum(sizes, axis=1) - sizes
    rank = np.arange(N)[None, :] - np.take_along_axis(starts, sorted_strata, axis=1)
    chosen_sorted = rank < np.take_along_axis(n_h, sorted_strata, axis=1)
    mask = np.zeros((B, N), dtype=bool)
    np.put_along_axis(mask, order, chosen_sorted, axis=1)
    return mask


# single-population builds -----------------------------------------------------


def build_mvsr(sets, cfg: DesignConfig, rng: np.random.Generator | None = None) -> StratifiedPopulation:
    """Sort each set on the single ranking column; order statistic ``h`` goes to stratum ``h``.

    Sign flips do not apply: MVSR ranks on the original ranking variable.
    """
    sets = _as_sets(sets)
    _check_sets(sets, cfg)
    if len(cfg.ranking_columns) != 1:
        raise DesignError("MVSR ranks on exactly one column")
    rng = cfg.rng() if rng is None else rng
    strata = mvsr_assignment(sets[..., cfg.ranking_columns[0]], rng)
    return _population("MVSR", sets, strata, cfg)


def build_cpor(sets, cfg: DesignConfig, heights: Sequence | None = None, rng=None) -> StratifiedPopulation:
    """Place every element in the stratum given by its rounded mean height.

    ``heights`` optionally supplies one :class:`~posetrss.linext.HeightSummary`
    per set; otherwise they are computed on the poset of the (sign-flipped)
    ranking columns, exactly when possible.
    """
    sets = _as_sets(sets)
    _check_sets(sets, cfg)
    if heights is not None:
        if len(heights) != cfg.K:
            raise DesignError("one HeightSummary per set is required")
        strata = np.stack([np.asarray(h.rounded_height) - 1 for h in heights])
        mh = np.stack([np.asarray(h.mean_height, dtype=float) for h in heights])
        exact = np.array([h.exact for h in heights])
    else:
        if rng is None and cfg.seed is not None:
            rng = cfg.rng()
        strata, mh, exact = cpor_assignment(_ranking_view(sets, cfg), rng, cfg.exact_cutoff, cfg.mc_height_draws)
    return _population("CPOR", sets, strata, cfg, mh, exact)


def build_rpor(sets, cfg: DesignConfig, rng: np.random.Generator | None = None) -> StratifiedPopulation:
    """Place the element at height ``h`` of one uniform linear extension into stratum ``h``."""
    sets = _as_sets(sets)
    _check_sets(sets, cfg)
    rng = cfg.rng() if rng is None else rng
    strata = rpor_assignment(_ranking_view(sets, cfg), rng, cfg.exact_cutoff)
    return _population("RPOR", sets, strata, cfg)


def build(sets, cfg: DesignConfig, rng: np.random.Generator | None = None) -> StratifiedPopulation:
    rng = cfg.rng() if rng is None else rng
    if cfg.design_kind == "MVSR":
        return build_mvsr(sets, cfg, rng)
    if cfg.design_kind == "CPOR":
        return build_cpor(sets, cfg, rng=rng)
    return build_rpor(sets, cfg, rng)


# allocation and sampling ------------------------------------------------------


def allocate_proportional(stratum_sizes, total: int) -> Allocation:
    """Split ``total`` draws across strata in proportion to their sizes.

    Largest-remainder apportionment (ties to the lower stratum), then every
    non-empty stratum gets at least one draw and no stratum more than its
    size. Units move from the stratum furthest above its proportional quota
    to the one furthest below it.
    """
    return Allocation(_allocate(tuple(int(k) for k in stratum_sizes), int(total)).copy())


@lru_cache(maxsize=8192)
def _allocate(sizes: tuple, total: int) -> np.ndarray:
    k = np.array(sizes, dtype=np.int64)
    if np.any(k < 0):
        raise DesignError("stratum sizes must be non-negative")
    pool = int(k.sum())
    nonempty = k > 0
    if total > pool:
        raise DesignError(f"cannot draw {total} units from strata holding {pool}")
    if total < int(nonempty.sum()):
        raise DesignError(f"total {total} is below the {int(nonempty.sum())} non-empty strata")
    if pool == 0:
        return np.zeros_like(k)
    quota = total * k / pool
    n = np.floor(quota).astype(np.int64)
    # integer remainders keep ties exact
    rem = total * k - n * pool
    short = total - int(n.sum())
    for h in sorted(range(k.size), key=lambda h: (-rem[h], h))[:short]:
        n[h] += 1
    lower = nonempty.astype(np.int64)
    while True:
        need = np.flatnonzero(n < lower)
        over = np.flatnonzero(n > k)
        if need.size == 0 and over.size == 0:
            break
        if need.size:
            take = need[0]
            donors = np.flatnonzero(n > lower)
            give = donors[np.argmax(n[donors] - quota[donors])]
            n[take] += 1
            n[give] -= 1
        else:
            give = over[0]
            takers = np.flatnonzero(n < k)
            take = takers[np.argmax(quota[takers] - n[takers])]
            n[give] -= 1
            n[take] += 1
    n.setflags(write=False)
    return n


def equal_allocation(m: int, n: int) -> Allocation:
    return Allocation(np.full(m, n, dtype=np.int64))


def draw_srswor(stratum: Sequence, n_h: int, rng: np.random.Generator) -> list:
    """Simple random sample without replacement of ``n_h`` items."""
    items = list(stratum)
    if not 0 <= n_h <= len(items):
        raise DesignError(f"cannot draw {n_h} from a stratum of {len(items)}")
    picks = rng.permutation(len(items))[:n_h]
    return [items[i] for i in picks]


def draw_samples(
    pop: StratifiedPopulation, alloc: Allocation, rng: np.random.Generator
) -> list[np.ndarray]:
    """Row indices sampled from each stratum of ``pop``."""
    n_h = np.asarray(alloc.n_h, dtype=np.int64)
    if n_h.shape != (pop.m,):
        raise DesignError("allocation does not match the number of strata")
    if np.any(n_h > pop.stratum_sizes):
        raise DesignError("allocation exceeds a stratum size")
    mask = select_within_strata((pop.stratum - 1)[None, :], n_h[None, :], rng)[0]
    return [np.flatnonzero(mask & (pop.stratum == h)) for h in range(1, pop.m + 1)]


def allocation_for(pop: StratifiedPopulation, n: int) -> Allocation:
    """Equal ``n`` per stratum for MVSR/RPOR, proportional budget ``n * m`` for CPOR."""
    if pop.design_kind == "CPOR":
        return allocate_proportional(pop.stratum_sizes, n * pop.m)
    return equal_allocation(pop.m, n)

