"""Domain types and objectives for collaborative caching across a pool of SBS caches.

Placements are indexed ``[cache, video]`` where the cache axis follows the pool's
original cache ids and the video axis follows catalog order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class VideoCatalog:
    """Per-video ids, sizes (bytes) and popularities.

    ``popularity`` may be ``None`` when a catalog is loaded without that column;
    it is then derived from a trace before any objective is evaluated.
    """

    ids: np.ndarray
    sizes: np.ndarray
    popularity: Optional[np.ndarray] = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if ids.ndim != 1 or sizes.shape != ids.shape:
            raise ValueError("ids and sizes must be 1-d arrays of equal length")
        if np.any(sizes <= 0):
            raise ValueError("video sizes must be strictly positive")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("video ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "sizes", sizes)
        if self.popularity is not None:
            pop = np.asarray(self.popularity, dtype=np.float64)
            if pop.shape != ids.shape:
                raise ValueError("popularity length does not match catalog")
            if np.any(pop < 0) or not np.all(np.isfinite(pop)):
                raise ValueError("popularities must be finite and >= 0")
            object.__setattr__(self, "popularity", pop)
        object.__setattr__(self, "_index", {int(v): k for k, v in enumerate(ids)})

    @classmethod
    def from_lists(cls, sizes: Sequence[int], popularity=None, ids=None) -> "VideoCatalog":
        if ids is None:
            ids = range(len(sizes))
        return cls(np.asarray(list(ids)), np.asarray(list(sizes)),
                   None if popularity is None else np.asarray(list(popularity), dtype=float))

    def __len__(self):
        return len(self.ids)

    @property
    def K(self) -> int:
        return len(self.ids)

    def index_of(self, video_id: int) -> int:
        try:
            return self._index[int(video_id)]
        except KeyError:
            raise KeyError(f"unknown video id {video_id}") from None

    def indices_of(self, video_ids) -> np.ndarray:
        """Vectorised id -> catalog index lookup; raises KeyError on unknown ids."""
        video_ids = np.asarray(video_ids, dtype=np.int64)
        order = np.argsort(self.ids, kind="stable")
        sorted_ids = self.ids[order]
        pos = np.searchsorted(sorted_ids, video_ids)
        pos = np.clip(pos, 0, max(len(sorted_ids) - 1, 0))
        if len(sorted_ids) == 0 or np.any(sorted_ids[pos] != video_ids):
            bad = video_ids[(len(sorted_ids) == 0) | (sorted_ids[pos] != video_ids)]
            raise KeyError(f"unknown video id {int(bad[0])}")
        return order[pos]

    def with_popularity(self, popularity) -> "VideoCatalog":
        return VideoCatalog(self.ids, self.sizes, np.asarray(popularity, dtype=np.float64))

    def require_popularity(self) -> np.ndarray:
        if self.popularity is None:
            raise ValueError("catalog has no popularity values")
        return self.popularity

    @property
    def density(self) -> np.ndarray:
        return self.require_popularity() / self.sizes

    def popularity_order(self) -> np.ndarray:
        """Indices by popularity descending, ties by ascending video id."""
        return np.lexsort((self.ids, -self.require_popularity()))

    def density_order(self) -> np.ndarray:
        """Indices by popularity density descending, ties by ascending video id."""
        return np.lexsort((self.ids, -self.density))


@dataclass(frozen=True)
class CachePool:
    """Cache capacities in bytes, one per SBS; cache ids are list positions."""

    capacities: np.ndarray

    def __post_init__(self):
        caps = np.asarray(self.capacities, dtype=np.int64).reshape(-1)
        # zero-capacity caches are allowed: they model SBSs without storage
        if np.any(caps < 0):
            raise ValueError("cache capacities must be non-negative")
        object.__setattr__(self, "capacities", caps)

    @classmethod
    def uniform(cls, n: int, capacity: int) -> "CachePool":
        return cls(np.full(n, capacity, dtype=np.int64))

    def __len__(self):
        return len(self.capacities)

    @property
    def N(self) -> int:
        return len(self.capacities)

    def canonical_order(self) -> np.ndarray:
        """Cache ids by decreasing capacity, ties by ascending id."""
        return np.lexsort((np.arange(self.N), -self.capacities))


@dataclass(frozen=True)
class DelayParams:
    """Neighbor playout delay ``d`` and remote playout delay ``D`` in seconds."""

    d: float
    D: float

    def __post_init__(self):
        if not (0 <= self.d < self.D):
            raise ValueError(f"need 0 <= d < D, got d={self.d}, D={self.D}")

    @classmethod
    def from_ms(cls, d_ms: int, D_ms: int) -> "DelayParams":
        return cls(d_ms / 1000.0, D_ms / 1000.0)


class Placement:
    """Binary assignment ``x[i, k]``: video k (catalog index) stored at cache i."""

    def __init__(self, x):
        self.x = np.asarray(x)
        if self.x.ndim != 2:
            raise ValueError("placement must be a 2-d cache x video matrix")

    @classmethod
    def empty(cls, n_caches: int, n_videos: int) -> "Placement":
        return cls(np.zeros((n_caches, n_videos), dtype=np.int8))

    @classmethod
    def from_contents(cls, contents, n_videos: int) -> "Placement":
        x = np.zeros((len(contents), n_videos), dtype=np.int8)
        for i, videos in enumerate(contents):
            x[i, list(videos)] = 1
        return cls(x)

    @property
    def shape(self):
        return self.x.shape

    @property
    def copies(self) -> np.ndarray:
        """Copy counts ``n_k``."""
        return self.x.sum(axis=0).astype(np.int64)

    def contents(self) -> list:
        """Per-cache sets of catalog indices."""
        return [set(np.flatnonzero(row).tolist()) for row in self.x]

    def used_bytes(self, cat: VideoCatalog) -> np.ndarray:
        return self.x.astype(np.int64) @ cat.sizes

    def __eq__(self, other):
        return isinstance(other, Placement) and np.array_equal(self.x, other.x)

    def __repr__(self):
        return f"Placement(shape={self.x.shape}, copies={self.copies.tolist()})"


class FractionalPlacement:
    """Relaxed allocation ``z[i, k]`` in bytes with ``0 <= z[i, k] <= s_k``."""

    def __init__(self, z):
        self.z = np.asarray(z, dtype=np.float64)
        if self.z.ndim != 2:
            raise ValueError("fractional placement must be a 2-d cache x video matrix")

    @classmethod
    def from_placement(cls, p: Placement, cat: VideoCatalog) -> "FractionalPlacement":
        return cls(p.x.astype(np.float64) * cat.sizes[None, :])

    @property
    def aggregate(self) -> np.ndarray:
        """Aggregate bytes ``y_k`` across caches."""
        return self.z.sum(axis=0)

    def is_feasible(self, cat: VideoCatalog, pool: CachePool, tol: float = 1e-9) -> bool:
        if self.z.shape != (pool.N, cat.K):
            return False
        if np.any(self.z < -tol) or np.any(self.z > cat.sizes[None, :] + tol):
            return False
        return bool(np.all(self.z.sum(axis=1) <= pool.capacities + tol))


def _check_dims(x: np.ndarray, cat: VideoCatalog, pool: Optional[CachePool] = None):
    if x.shape[1] != cat.K:
        raise ValueError(f"placement has {x.shape[1]} videos, catalog has {cat.K}")
    if pool is not None and x.shape[0] != pool.N:
        raise ValueError(f"placement has {x.shape[0]} caches, pool has {pool.N}")


def reward_objective(p: Placement, cat: VideoCatalog, dp: DelayParams) -> float:
    """CCP reward ``sum_k pi_k [d * sum_i x_ik + (D - d) * sum_i max_i' x_i'k]``."""
    _check_dims(p.x, cat)
    pi = cat.require_popularity()
    n_caches = p.x.shape[0]
    x = p.x.astype(np.float64)
    covered = x.max(axis=0) if n_caches else np.zeros(cat.K)
    return float(np.sum(pi * (dp.d * x.sum(axis=0) + (dp.D - dp.d) * n_caches * covered)))


def copy_count_objective(copies, popularity, n_caches: int, dp: DelayParams) -> float:
    """Same reward written in copy counts: ``sum_k pi_k [d n_k + N (D - d) min(n_k, 1)]``."""
    n = np.asarray(copies, dtype=np.float64)
    pi = np.asarray(popularity, dtype=np.float64)
    return float(np.sum(pi * (dp.d * n + n_caches * (dp.D - dp.d) * np.minimum(n, 1.0))))


def average_delay_objective(p: Placement, cat: VideoCatalog, dp: DelayParams) -> float:
    """Expected playout delay (s) of a request at a uniformly random SBS."""
    _check_dims(p.x, cat)
    pi = cat.require_popularity()
    total = pi.sum()
    if total <= 0:
        raise ValueError("popularity vector sums to zero")
    pi = pi / total
    n_caches = p.x.shape[0]
    if n_caches == 0:
        return float(dp.D)
    x = p.x.astype(np.float64)
    covered = x.max(axis=0)
    per_video = ((covered[None, :] - x) * dp.d + (1.0 - covered[None, :]) * dp.D).sum(axis=0)
    return float(np.sum(pi * per_video) / n_caches)


def fractional_objective(fp: FractionalPlacement, cat: VideoCatalog, dp: DelayParams) -> float:
    """Relaxed reward ``sum_k w_k [d y_k + N (D - d) min(y_k, s_k)]`` with ``w = pi / s``."""
    _check_dims(fp.z, cat)
    w = cat.density
    y = fp.aggregate
    n_caches = fp.z.shape[0]
    return float(np.sum(w * (dp.d * y + n_caches * (dp.D - dp.d) * np.minimum(y, cat.sizes))))


def per_request_delay(p: Placement, sbs: int, video: int, dp: DelayParams) -> float:
    """Playout delay for ``video`` (catalog index) requested at cache ``sbs``."""
    n_caches, n_videos = p.x.shape
    if not (0 <= sbs < n_caches):
        raise ValueError(f"unknown cache id {sbs}")
    if not (0 <= video < n_videos):
        raise ValueError(f"unknown video index {video}")
    if p.x[sbs, video]:
        return 0.0
    if p.x[:, video].any():
        return float(dp.d)
    return float(dp.D)


@dataclass
class PlacementReport:
    overfull: list = field(default_factory=list)    # (cache, used_bytes, capacity)
    non_binary: list = field(default_factory=list)  # (cache, video, value)
    shape_error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return not (self.overfull or self.non_binary or self.shape_error)

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        parts = []
        if self.shape_error:
            parts.append(self.shape_error)
        for i, used, cap in self.overfull:
            parts.append(f"cache {i} holds {used} bytes > capacity {cap}")
        for i, k, v in self.non_binary:
            parts.append(f"x[{i},{k}] = {v} is not binary")
        return "; ".join(parts)


def validate_placement(p: Placement, cat: VideoCatalog, pool: CachePool) -> PlacementReport:
    report = PlacementReport()
    if p.x.shape != (pool.N, cat.K):
        report.shape_error = f"placement shape {p.x.shape} != ({pool.N}, {cat.K})"
        return report
    bad = np.argwhere((p.x != 0) & (p.x != 1))
    report.non_binary = [(int(i), int(k), p.x[i, k].item()) for i, k in bad]
    used = (p.x != 0).astype(np.int64) @ cat.sizes
    for i in np.flatnonzero(used > pool.capacities):
        report.overfull.append((int(i), int(used[i]), int(pool.capacities[i])))
    return report
