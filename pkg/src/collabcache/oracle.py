"""Exact CCP solvers for small instances and random feasible fractional samplers.

Nothing here imports the CCA module; these are the ground truth it is checked
against.

Two exact searches are provided:

``enumerate``
    Every cache's feasible subsets are enumerated depth-first (capacity-pruned,
    videos in density order) and combined cache by cache. Partial combinations
    are merged on the set of videos already covered, since the reward only
    depends on that set plus the per-cache popularity sums. Ties are resolved
    to the lexicographically smallest assignment matrix.

``branch-and-bound``
    Decides videos one at a time (how many copies, on which caches), pruning
    with a pooled fractional-knapsack upper bound. Caches with equal residual
    capacity are interchangeable for the remaining decisions, so only copy
    counts per residual class are branched on.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    CachePool,
    DelayParams,
    FractionalPlacement,
    Placement,
    VideoCatalog,
    copy_count_objective,
)


class BudgetExceeded(RuntimeError):
    """The instance is too large for the configured oracle budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_states: int = 10**8
    time_limit: float = 60.0

    def __post_init__(self):
        if self.max_states <= 0 or self.time_limit <= 0:
            raise ValueError("oracle budget limits must be positive")


def _density_order(cat: VideoCatalog) -> np.ndarray:
    pi = cat.require_popularity()
    return np.lexsort((cat.ids, -(pi / cat.sizes)))


def feasible_subsets(sizes, capacity: int, order, limit: int | None = None) -> list:
    """Bitmasks of every video subset fitting ``capacity``.

    Videos are explored in ``order``; a branch stops as soon as the running size
    exceeds the capacity. Returns ``None`` once more than ``limit`` subsets exist.
    """
    sizes = [int(sizes[k]) for k in order]
    bits = [1 << int(k) for k in order]
    out = []
    stack = [(0, 0, 0)]  # (next position, mask, used bytes)
    while stack:
        start, mask, used = stack.pop()
        out.append(mask)
        if limit is not None and len(out) > limit:
            return None
        for j in range(len(sizes) - 1, start - 1, -1):
            if used + sizes[j] <= capacity:
                stack.append((j + 1, mask | bits[j], used + sizes[j]))
    return out


def estimate_states(cat: VideoCatalog, pool: CachePool, cap: int | None = None) -> int:
    """Work estimate of the exhaustive search: ``2^K`` covered sets times all per-cache subsets."""
    order = _density_order(cat)
    table = 1 << cat.K
    total = 0
    for c in pool.capacities:
        limit = None if cap is None else max(cap // table, 0)
        subs = feasible_subsets(cat.sizes, int(c), order, limit)
        if subs is None:
            return cap + 1
        total += len(subs)
    return table * total


def _mask_sums(values) -> np.ndarray:
    K = len(values)
    sums = np.zeros(1 << K)
    for k, v in enumerate(values):
        bit = 1 << k
        sums[bit:2 * bit] = sums[:bit] + v
    return sums


def _row_key(mask: int, K: int) -> tuple:
    return tuple((mask >> k) & 1 for k in range(K))


def _enumerate_opt(cat, pool, dp, budget, deadline):
    K, N = cat.K, pool.N
    if K > 26:
        raise BudgetExceeded(f"exhaustive search over {K} videos is not supported")
    est = estimate_states(cat, pool, cap=budget.max_states)
    if est > budget.max_states:
        raise BudgetExceeded(f"estimated {est} states exceeds budget of {budget.max_states}")
    pi = cat.require_popularity()
    order = _density_order(cat)
    subsets = [np.array(feasible_subsets(cat.sizes, int(c), order), dtype=np.int64)
               for c in pool.capacities]
    pi_of = _mask_sums(pi)
    universe = np.arange(1 << K, dtype=np.int64)

    # value[i][U]: best reward obtainable from caches i.. given covered set U
    value = [None] * (N + 1)
    value[N] = N * (dp.D - dp.d) * pi_of
    for i in range(N - 1, -1, -1):
        best = np.full(1 << K, -np.inf)
        nxt = value[i + 1]
        for T in subsets[i]:
            np.maximum(best, dp.d * pi_of[T] + nxt[universe | T], out=best)
            if time.monotonic() > deadline:
                raise BudgetExceeded("oracle time limit exceeded")
        value[i] = best

    x = np.zeros((N, K), dtype=np.int8)
    covered = 0
    for i in range(N):
        target = value[i][covered]
        tol = 1e-12 * max(1.0, abs(target))
        cands = subsets[i]
        vals = dp.d * pi_of[cands] + value[i + 1][covered | cands]
        ok = cands[vals >= target - tol]
        chosen = min(ok.tolist(), key=lambda m: _row_key(m, K))
        for k in range(K):
            if (chosen >> k) & 1:
                x[i, k] = 1
        covered |= chosen
    return Placement(x)


class _Search:
    """Depth-first branch and bound over videos in density order."""

    def __init__(self, cat, pool, dp, budget, deadline):
        self.pi = cat.require_popularity()
        self.order = _density_order(cat)
        self.sizes = [int(cat.sizes[k]) for k in self.order]
        self.pis = [float(self.pi[k]) for k in self.order]
        self.N = pool.N
        self.K = cat.K
        self.d, self.D = dp.d, dp.D
        self.first_gain = [p * (self.d + self.N * (self.D - self.d)) for p in self.pis]
        self.budget = budget
        self.deadline = deadline
        self.nodes = 0
        self.best_value = -math.inf
        self.best_assign = None
        self._knapsack_tables(pool.capacities)

    def _knapsack_tables(self, capacities, budget_cells: int = 8_000_000):
        """Per-cache 0-1 knapsack tables over sizes rounded down to a grid.

        ``self.tables[j][t - j]`` is indexed by rounded capacity and holds the
        best single-cache value of videos ``j..`` when videos before ``t`` are
        worth ``d * pi`` per copy and videos from ``t`` on are worth a full first
        copy. Rounding sizes down only enlarges the feasible sets, so lookups
        over-estimate, which keeps the bound valid.
        """
        K = self.K
        cmax = int(max(capacities)) if len(capacities) else 0
        cells = max(64, min(20000, budget_cells // max(1, (K + 1) * (K + 2) // 2)))
        self.grid = max(1, -(-cmax // cells))
        width = cmax // self.grid + 1
        first = self.d + self.N * (self.D - self.d)

        def add(prev, r, weight):
            cur = prev.copy()
            w = self.sizes[r] // self.grid
            if w < width:
                np.maximum(cur[w:], prev[:width - w] + weight, out=cur[w:])
            return cur

        plain = [None] * (K + 1)
        plain[K] = np.zeros(width)
        for r in range(K - 1, -1, -1):
            plain[r] = add(plain[r + 1], r, self.pis[r])
        rows = [[None] * (K - j + 1) for j in range(K + 1)]
        for t in range(K, -1, -1):
            cur = first * plain[t]
            rows[t][0] = cur
            for j in range(t - 1, -1, -1):
                cur = add(cur, j, self.d * self.pis[j])
                rows[j][t - j] = cur
        self.tables = [np.stack(r) for r in rows]
        suffix = np.concatenate([np.cumsum(self.pis[::-1])[::-1], [0.0]])
        # coverage credited to videos j..t-1 assumed covered
        self.assumed = [self.N * (self.D - self.d) * (suffix[j] - suffix[j:]) for j in range(K + 1)]

    def bound(self, j, residual):
        """Upper bound on the reward still obtainable from videos ``j..``.

        Minimum over a family of relaxations (videos ``j..t-1`` assumed covered,
        the rest valued per copy as first copies, each cache packed on its own)
        and a pooled fractional knapsack with copy limits.
        """
        idx = [c // self.grid for c in residual]
        family = float(np.min(self.assumed[j] + self.tables[j][:, idx].sum(axis=1)))
        return min(family, self.pooled_bound(j, residual))

    def pooled_bound(self, j, residual):
        room = sum(residual)
        if room <= 0:
            return 0.0
        # items: (density, size, gain) for first copies and for extra copies
        items = []
        for r in range(j, self.K):
            s = self.sizes[r]
            fits = sum(1 for c in residual if c >= s)
            if fits == 0 or self.pis[r] == 0:
                continue
            items.append((self.first_gain[r] / s, s, self.first_gain[r]))
            if fits > 1 and self.d > 0:
                extra = (fits - 1) * s
                items.append((self.pis[r] * self.d / s, extra, self.pis[r] * self.d * (fits - 1)))
        items.sort(key=lambda t: -t[0])
        total = 0.0
        for dens, size, gain in items:
            if size <= room:
                total += gain
                room -= size
            else:
                total += dens * room
                break
        return total

    def run(self, capacities):
        residual = [int(c) for c in capacities]
        # incumbent from per-cache greedy fill
        assign = [[] for _ in range(self.K)]
        res = list(residual)
        for i in range(self.N):
            for r in range(self.K):
                if self.sizes[r] <= res[i]:
                    res[i] -= self.sizes[r]
                    assign[r].append(i)
        self.best_value = self.value_of(assign)
        self.best_assign = [list(a) for a in assign]
        self._dfs(0, residual, 0.0, [])
        return self.best_assign

    def value_of(self, assign):
        total = 0.0
        for r, caches in enumerate(assign):
            n = len(caches)
            if n:
                total += self.pis[r] * (self.d * n + self.N * (self.D - self.d))
        return total

    def _children(self, r, residual):
        s = self.sizes[r]
        classes = {}
        for i, c in enumerate(residual):
            if c >= s:
                classes.setdefault(c, []).append(i)
        groups = sorted(classes.items(), key=lambda kv: -kv[0])
        # copy counts per residual class; more copies first
        combos = [[]]
        for _, members in groups:
            combos = [prev + [members[:t]] for prev in combos
                      for t in range(len(members), -1, -1)]
        out = []
        for combo in combos:
            chosen = [i for part in combo for i in part]
            out.append(chosen)
        out.sort(key=lambda c: -len(c))
        return out

    def _dfs(self, r, residual, value, assign):
        self.nodes += 1
        if self.nodes > self.budget.max_states:
            raise BudgetExceeded(f"branch and bound exceeded {self.budget.max_states} nodes")
        if (self.nodes & 1023) == 0 and time.monotonic() > self.deadline:
            raise BudgetExceeded("oracle time limit exceeded")
        if r == self.K:
            if value > self.best_value * (1 + 1e-12) + 1e-15:
                self.best_value = value
                self.best_assign = [list(a) for a in assign]
            return
        if value + self.bound(r, residual) <= self.best_value * (1 + 1e-12) + 1e-15:
            return
        s = self.sizes[r]
        for chosen in self._children(r, residual):
            n = len(chosen)
            gain = self.pis[r] * (self.d * n + self.N * (self.D - self.d)) if n else 0.0
            for i in chosen:
                residual[i] -= s
            assign.append(chosen)
            self._dfs(r + 1, residual, value + gain, assign)
            assign.pop()
            for i in chosen:
                residual[i] += s


def _branch_and_bound(cat, pool, dp, budget, deadline):
    search = _Search(cat, pool, dp, budget, deadline)
    assign = search.run(pool.capacities)
    x = np.zeros((pool.N, cat.K), dtype=np.int8)
    for r, caches in enumerate(assign):
        for i in caches:
            x[i, search.order[r]] = 1
    return Placement(x)


def reward_upper_bound(cat: VideoCatalog, pool: CachePool, dp: DelayParams) -> float:
    """Certified upper bound on the optimal reward (the search's root relaxation).

    Useful when the exact search runs out of budget: the optimal average delay
    is then at least ``(D * sum(pi) - bound / N) / sum(pi)``.
    """
    cat.require_popularity()
    if cat.K == 0 or pool.N == 0:
        return 0.0
    search = _Search(cat, pool, dp, OracleBudget(), math.inf)
    return search.bound(0, [int(c) for c in pool.capacities])


def brute_force_opt(cat: VideoCatalog, pool: CachePool, dp: DelayParams,
                    budget: OracleBudget | None = None, method: str = "auto"):
    """Reward-maximising integral placement and its reward.

    ``method`` is ``"enumerate"``, ``"branch-and-bound"`` or ``"auto"`` (enumerate
    when its up-front estimate fits the budget, otherwise branch and bound).
    Raises :class:`BudgetExceeded` when the budget is (or would be) exhausted.
    """
    budget = budget or OracleBudget()
    deadline = time.monotonic() + budget.time_limit
    cat.require_popularity()
    if cat.K == 0 or pool.N == 0:
        p = Placement.empty(pool.N, cat.K)
        return p, 0.0
    if method not in ("auto", "enumerate", "branch-and-bound"):
        raise ValueError(f"unknown oracle method {method!r}")
    if method == "enumerate":
        p = _enumerate_opt(cat, pool, dp, budget, deadline)
    elif method == "branch-and-bound":
        p = _branch_and_bound(cat, pool, dp, budget, deadline)
    else:
        fits = cat.K <= 26 and estimate_states(cat, pool, cap=budget.max_states) <= budget.max_states
        if fits:
            p = _enumerate_opt(cat, pool, dp, budget, deadline)
        else:
            p = _branch_and_bound(cat, pool, dp, budget, deadline)
    reward = copy_count_objective(p.copies, cat.popularity, pool.N, dp)
    return p, reward


def sample_fractional_feasible(cat: VideoCatalog, pool: CachePool, seed: int, count: int) -> list:
    """Random feasible relaxed placements by randomized water-filling.

    Each cache visits the videos in its own random order and takes a random
    fraction of each (sometimes all, sometimes none) until it is full.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    N, K = pool.N, cat.K
    sizes = cat.sizes.astype(np.float64)
    out = []
    for _ in range(count):
        z = np.zeros((N, K))
        for i in range(N):
            room = float(pool.capacities[i])
            if room <= 0 or K == 0:
                continue
            # mix of whole-video and fractional draws
            frac = rng.random(K)
            frac = np.where(rng.random(K) < 0.5, np.where(frac < 0.5, 0.0, 1.0), frac)
            for k in rng.permutation(K):
                take = min(frac[k] * sizes[k], room)
                z[i, k] = take
                room -= take
                if room <= 0:
                    break
        out.append(FractionalPlacement(z))
    return out
