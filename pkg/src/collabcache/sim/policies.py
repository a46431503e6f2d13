"""Collaborative LRU and LFU caches.

Each cache evicts on its own, but a miss is first served by the lowest-id peer
holding the video before falling back to the remote server. The requesting
cache then inserts the video (unless it is larger than the whole cache).
"""

from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

SELF, NEIGHBOR, REMOTE = "self", "neighbor", "remote"


@dataclass(frozen=True)
class Outcome:
    kind: str
    source: int | None = None  # serving peer for neighbor hits


@dataclass
class CacheState:
    """Per-cache contents keyed by catalog index, plus byte usage.

    ``sizes`` maps catalog index to bytes. ``neighbor_serving=False`` turns every
    peer hit into a remote fetch.
    """

    capacities: list
    sizes: list
    neighbor_serving: bool = True
    used: list = None
    clock: int = 0

    def __post_init__(self):
        self.capacities = [int(c) for c in self.capacities]
        self.sizes = [int(v) for v in np.asarray(self.sizes).tolist()]
        if self.used is None:
            self.used = [0] * len(self.capacities)

    def holds(self, cache: int, video: int) -> bool:
        raise NotImplementedError

    def contents(self) -> list:
        raise NotImplementedError

    def lookup(self, cache: int, video: int) -> Outcome:
        if self.holds(cache, video):
            return Outcome(SELF)
        if self.neighbor_serving:
            for j in range(len(self.capacities)):
                if j != cache and self.holds(j, video):
                    return Outcome(NEIGHBOR, j)
        return Outcome(REMOTE)


@dataclass
class LruState(CacheState):
    entries: list = None

    def __post_init__(self):
        super().__post_init__()
        if self.entries is None:
            self.entries = [OrderedDict() for _ in self.capacities]

    def holds(self, cache, video):
        return video in self.entries[cache]

    def contents(self):
        return [set(e) for e in self.entries]


@dataclass
class LfuState(CacheState):
    """Request counters are per cache, count every request there, and never reset.

    Eviction takes the lowest count, then the least recent use, then the lowest
    video index. The heap is lazy: stale keys are skipped on pop.
    """

    entries: list = None   # cache -> {video: last_use}
    counts: list = None    # cache -> {video: requests seen}
    heaps: list = None

    def __post_init__(self):
        super().__post_init__()
        n = len(self.capacities)
        if self.entries is None:
            self.entries = [{} for _ in range(n)]
        if self.counts is None:
            self.counts = [{} for _ in range(n)]
        if self.heaps is None:
            self.heaps = [[] for _ in range(n)]

    def holds(self, cache, video):
        return video in self.entries[cache]

    def contents(self):
        return [set(e) for e in self.entries]


def make_state(policy: str, capacities, sizes, neighbor_serving: bool = True) -> CacheState:
    if policy == "lru":
        return LruState(capacities, sizes, neighbor_serving)
    if policy == "lfu":
        return LfuState(capacities, sizes, neighbor_serving)
    raise ValueError(f"unknown replacement policy {policy!r}")


def collaborative_lru_step(state: LruState, event):
    """Serve ``event`` (cache, catalog index) and update recency; mutates and returns ``state``."""
    cache, video = event
    state.clock += 1
    entries = state.entries[cache]
    outcome = state.lookup(cache, video)
    if outcome.kind == SELF:
        entries.move_to_end(video)
        return outcome, state
    size = state.sizes[video]
    cap = state.capacities[cache]
    if size > cap:
        return outcome, state
    while state.used[cache] + size > cap:
        victim, _ = entries.popitem(last=False)
        state.used[cache] -= state.sizes[victim]
    entries[video] = state.clock
    state.used[cache] += size
    return outcome, state


def collaborative_lfu_step(state: LfuState, event):
    """Serve ``event`` (cache, catalog index) and update frequencies; mutates and returns ``state``."""
    cache, video = event
    state.clock += 1
    now = state.clock
    counts, entries, heap = state.counts[cache], state.entries[cache], state.heaps[cache]
    counts[video] = counts.get(video, 0) + 1
    outcome = state.lookup(cache, video)
    if outcome.kind == SELF:
        entries[video] = now
        heapq.heappush(heap, (counts[video], now, video))
        return outcome, state
    size = state.sizes[video]
    cap = state.capacities[cache]
    if size > cap:
        return outcome, state
    while state.used[cache] + size > cap:
        cnt, last, victim = heapq.heappop(heap)
        if entries.get(victim) != last or counts[victim] != cnt:
            continue
        del entries[victim]
        state.used[cache] -= state.sizes[victim]
    entries[video] = now
    heapq.heappush(heap, (counts[video], now, video))
    state.used[cache] += size
    if len(heap) > 4 * len(entries) + 64:
        state.heaps[cache] = heap = [(counts[v], t, v) for v, t in entries.items()]
        heapq.heapify(heap)
    return outcome, state


STEPS = {"lru": collaborative_lru_step, "lfu": collaborative_lfu_step}
