"""Collaborative Caching Algorithm (CCA).

Two entry points compute placements:

* :func:`cca_unit` for catalogs whose videos all have one common size and whose
  caches hold an integral number of them (exact optimum).
* :func:`cca_general` for arbitrary sizes: fractional greedy filling, fractional
  compare-and-replace, then rounding to whole videos.

Videos are ranked by popularity (unit case) or popularity density (general
case), descending, with ties broken by ascending video id. Caches are visited in
canonical order: decreasing capacity, ties by ascending cache id. Every cache
can therefore run the computation on its own and reach the same global answer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import CachePool, DelayParams, FractionalPlacement, Placement, VideoCatalog

# relative tolerance under which the ratio test counts as an exact hit (and fails)
RATIO_RTOL = 1e-12


def ratio_threshold(n_caches: int, dp: DelayParams) -> float:
    """Popularity ratio above which a duplicate copy is worth replacing."""
    if n_caches < 1:
        raise ValueError("need at least one cache")
    return dp.d / (n_caches * dp.D - (n_caches - 1) * dp.d)


def passes_ratio_test(value_new: float, value_old: float, threshold: float) -> bool:
    """Strict ``value_new / value_old > threshold`` without dividing by zero."""
    rhs = threshold * value_old
    return value_new - rhs > RATIO_RTOL * max(abs(value_new), abs(rhs))


def _unit_size(cat: VideoCatalog, pool: CachePool) -> int:
    if cat.K == 0:
        return 1
    unit = int(cat.sizes[0])
    if np.any(cat.sizes != unit):
        raise ValueError("cca_unit needs all videos to have the same size")
    if np.any(pool.capacities % unit):
        raise ValueError("cca_unit needs every capacity to be a whole number of videos")
    return unit


def cca_unit(cat: VideoCatalog, pool: CachePool, dp: DelayParams) -> Placement:
    """Exact CCA for equal-size videos and capacities that are multiples of that size."""
    unit = _unit_size(cat, pool)
    K, N = cat.K, pool.N
    if K == 0 or N == 0:
        return Placement.empty(N, K)

    order = cat.popularity_order()
    pi = cat.popularity[order]
    caches = pool.canonical_order()
    slots = pool.capacities // unit

    # Phase I: cache i takes the m_i most popular videos
    holders = [[] for _ in range(K)]  # rank -> canonical cache positions, ascending
    for pos, i in enumerate(caches):
        for rank in range(min(int(slots[i]), K)):
            holders[rank].append(pos)

    copies = np.array([len(h) for h in holders])
    k1 = int(np.count_nonzero(copies > 1)) - 1
    k2 = int(np.count_nonzero(copies > 0))

    # Phase II: swap the least popular duplicate for the most popular uncached video
    threshold = ratio_threshold(N, dp)
    while k1 >= 0 and k2 < K and passes_ratio_test(pi[k2], pi[k1], threshold):
        pos = holders[k1].pop()
        holders[k2].append(pos)
        k2 += 1
        if len(holders[k1]) == 1:
            k1 -= 1

    x = np.zeros((N, K), dtype=np.int8)
    for rank, positions in enumerate(holders):
        for pos in positions:
            x[caches[pos], order[rank]] = 1
    return Placement(x)


@dataclass
class CcaWorkingState:
    """Bookkeeping shared by the three phases of the general algorithm.

    Ranks index videos in density order; cache positions index caches in
    canonical order. ``alloc[rank]`` maps cache position to bytes held. After
    Phase I the ranks split into three contiguous runs: ``[0, k1]`` holds more
    than one copy, ``(k1, k2)`` exactly one, ``[k2, K)`` less than one.
    """

    order: np.ndarray
    sizes: list
    density: np.ndarray
    cache_order: np.ndarray
    capacities: list
    alloc: list
    y: list
    k1: int
    k2: int
    n_videos: int
    steps: list = field(default_factory=list)

    @property
    def n_caches(self) -> int:
        return len(self.cache_order)

    def labels(self) -> np.ndarray:
        """Per-rank set label: 2 for more than one copy, 1 for exactly one, 0 for less."""
        y = np.asarray(self.y, dtype=np.int64)
        s = np.asarray(self.sizes, dtype=np.int64)
        return np.where(y > s, 2, np.where(y == s, 1, 0))

    def fractional(self) -> FractionalPlacement:
        z = np.zeros((self.n_caches, self.n_videos))
        for rank, held in enumerate(self.alloc):
            k = self.order[rank]
            for pos, b in held.items():
                z[self.cache_order[pos], k] = b
        return FractionalPlacement(z)


def init_state(cat: VideoCatalog, pool: CachePool) -> CcaWorkingState:
    """Phase I: every cache fills itself in density order, splitting the last video."""
    order = cat.density_order()
    sizes = cat.sizes[order]
    cum = np.cumsum(sizes)
    caches = pool.canonical_order()
    K = cat.K
    alloc = [{} for _ in range(K)]
    for pos, i in enumerate(caches):
        cap = int(pool.capacities[i])
        full = int(np.searchsorted(cum, cap, side="right"))
        for rank in range(full):
            alloc[rank][pos] = int(sizes[rank])
        rest = cap - (int(cum[full - 1]) if full else 0)
        if full < K and rest > 0:
            alloc[full][pos] = rest

    y = [sum(held.values()) for held in alloc]
    sizes = [int(s) for s in sizes]
    over = [r for r in range(K) if y[r] > sizes[r]]
    under = [r for r in range(K) if y[r] < sizes[r]]
    return CcaWorkingState(
        order=order,
        sizes=sizes,
        density=cat.density[order],
        cache_order=caches,
        capacities=[int(pool.capacities[i]) for i in caches],
        alloc=alloc,
        y=y,
        k1=over[-1] if over else -1,
        k2=under[0] if under else K,
        n_videos=K,
    )


def greedy_fill_fractional(cat: VideoCatalog, pool: CachePool) -> FractionalPlacement:
    return init_state(cat, pool).fractional()


def compare_and_replace_fractional(state: CcaWorkingState, dp: DelayParams) -> FractionalPlacement:
    """Phase II, in place on ``state``.

    Excess bytes of the lowest-density duplicated video are handed to the
    highest-density under-cached video while the density ratio passes the test.
    Bytes leave the highest-positioned caches first and the new video takes
    exactly the freed space.
    """
    K = state.n_videos
    if state.n_caches == 0:
        return state.fractional()
    threshold = ratio_threshold(state.n_caches, dp)
    w, s, y, alloc = state.density, state.sizes, state.y, state.alloc
    k1, k2 = state.k1, state.k2
    while k1 >= 0 and k2 < K and passes_ratio_test(w[k2], w[k1], threshold):
        r = min(y[k1] - s[k1], s[k2] - y[k2])
        src, dst = alloc[k1], alloc[k2]
        left = r
        for pos in sorted(src, reverse=True):
            take = min(src[pos], left)
            src[pos] -= take
            if src[pos] == 0:
                del src[pos]
            dst[pos] = dst.get(pos, 0) + take
            left -= take
            if left == 0:
                break
        y[k1] -= r
        y[k2] += r
        state.steps.append((k1, k2, r))
        if y[k1] == s[k1]:
            k1 -= 1
        if y[k2] == s[k2]:
            k2 += 1
    state.k1, state.k2 = k1, k2
    return state.fractional()


def pack_single_copies(sizes, space):
    """Walk videos in order, placing each whole in the head of the open-cache queue.

    ``space`` lists the bytes each cache (canonical order) may devote to these
    videos. A video that does not fit the head cache is dropped and that cache
    is closed. Caches whose space runs out are closed too.

    Returns ``(placed, dropped)``: ``placed`` holds ``(video_pos, cache_pos)``
    pairs and ``dropped`` video positions.
    """
    space = list(space)
    open_caches = deque(pos for pos, c in enumerate(space) if c > 0)
    placed, dropped = [], []
    for j, size in enumerate(sizes):
        if not open_caches:
            dropped.append(j)
            continue
        head = open_caches[0]
        # non-strict: an exact fit is kept
        if space[head] >= size:
            placed.append((j, head))
            space[head] -= size
            if space[head] == 0:
                open_caches.popleft()
        else:
            dropped.append(j)
            open_caches.popleft()
    return placed, dropped


def round_placement(fp: FractionalPlacement, state: CcaWorkingState) -> Placement:
    """Phase III: keep whole duplicated copies, re-pack single-copy videos, drop the rest."""
    K, N = state.n_videos, state.n_caches
    x = np.zeros((N, K), dtype=np.int8)
    labels = state.labels()
    order, caches = state.order, state.cache_order

    for rank in np.flatnonzero(labels == 2):
        k = order[rank]
        full = fp.z[:, k] == state.sizes[rank]
        x[full, k] = 1

    single = np.flatnonzero(labels == 1)
    space = [0] * N
    for pos, i in enumerate(caches):
        space[pos] = int(round(fp.z[i, order[single]].sum())) if len(single) else 0
    placed, _ = pack_single_copies([state.sizes[r] for r in single], space)
    for j, pos in placed:
        x[caches[pos], order[single[j]]] = 1
    return Placement(x)


def cca_fractional(cat: VideoCatalog, pool: CachePool, dp: DelayParams):
    """Phases I and II; returns the optimal relaxed placement and the working state."""
    state = init_state(cat, pool)
    fp = compare_and_replace_fractional(state, dp)
    return fp, state


def cca_general(cat: VideoCatalog, pool: CachePool, dp: DelayParams) -> Placement:
    if cat.K == 0 or pool.N == 0:
        return Placement.empty(pool.N, cat.K)
    fp, state = cca_fractional(cat, pool, dp)
    return round_placement(fp, state)


def cca_local(cat: VideoCatalog, pool: CachePool, dp: DelayParams, cache_id: int):
    """What one SBS computes on its own: its row plus the global placement it implies."""
    p = cca_general(cat, pool, dp)
    return p.x[cache_id].copy(), p


def cca_greedy_only(cat: VideoCatalog, pool: CachePool, dp: DelayParams) -> Placement:
    """Greedy filling alone, with each cache's trailing partial video dropped."""
    if cat.K == 0 or pool.N == 0:
        return Placement.empty(pool.N, cat.K)
    state = init_state(cat, pool)
    x = np.zeros((pool.N, cat.K), dtype=np.int8)
    for rank, held in enumerate(state.alloc):
        for pos, b in held.items():
            if b == state.sizes[rank]:
                x[state.cache_order[pos], state.order[rank]] = 1
    return Placement(x)


def epsilon(cat: VideoCatalog, pool: CachePool) -> float:
    """Largest video size over smallest cache capacity."""
    if cat.K == 0 or pool.N == 0:
        return 0.0
    c_min = int(pool.capacities.min())
    return float("inf") if c_min == 0 else int(cat.sizes.max()) / c_min


def rounding_gap_bound(cat: VideoCatalog, pool: CachePool, dp: DelayParams) -> float:
    """Relative loss bound ``2 (D/d + 1) eps`` of rounding; infinite when d = 0."""
    eps = epsilon(cat, pool)
    if dp.d == 0:
        return float("inf")
    return 2.0 * (dp.D / dp.d + 1.0) * eps
