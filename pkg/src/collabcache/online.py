"""Windowed popularity estimation and re-optimization transfer planning."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import Placement, VideoCatalog


@dataclass(frozen=True)
class PopularityEstimator:
    """EWMA of per-window request shares.

    ``estimates`` is the popularity used for the current placement; ``window``
    is W (requests per window) and ``alpha`` the weight of the newest window.
    """

    estimates: np.ndarray
    window: int
    alpha: float
    last_counts: np.ndarray = None

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window length must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        est = np.asarray(self.estimates, dtype=np.float64)
        if np.any(est < 0):
            raise ValueError("estimates must be non-negative")
        object.__setattr__(self, "estimates", est)

    @classmethod
    def cold(cls, n_videos: int, window: int, alpha: float) -> "PopularityEstimator":
        return cls(np.zeros(n_videos), window, alpha)

    def grow(self, n_videos: int) -> "PopularityEstimator":
        """Extend to a larger catalog; unseen videos start at zero."""
        if n_videos <= len(self.estimates):
            return self
        est = np.concatenate([self.estimates, np.zeros(n_videos - len(self.estimates))])
        return replace(self, estimates=est)


def ewma_update(est: PopularityEstimator, counts) -> PopularityEstimator:
    """``pi <- (1 - alpha) pi + alpha * n / W`` for every video."""
    counts = np.asarray(counts)
    if counts.shape != est.estimates.shape:
        raise ValueError(f"got {counts.shape[0]} counts for {len(est.estimates)} videos")
    if np.any(counts < 0):
        raise ValueError("request counts must be non-negative")
    new = (1.0 - est.alpha) * est.estimates + est.alpha * counts / est.window
    return replace(est, estimates=new, last_counts=counts.copy())


def _normalized(v: np.ndarray) -> np.ndarray:
    total = v.sum()
    return v / total if total > 0 else np.zeros_like(v, dtype=np.float64)


def should_reoptimize(old_est, new_est, threshold: float = 0.0) -> bool:
    """True when the normalized popularity vectors differ by more than ``threshold`` in L1."""
    old = np.asarray(getattr(old_est, "estimates", old_est), dtype=np.float64)
    new = np.asarray(getattr(new_est, "estimates", new_est), dtype=np.float64)
    if old.shape != new.shape:
        raise ValueError("estimate vectors differ in length")
    return float(np.abs(_normalized(old) - _normalized(new)).sum()) > threshold


@dataclass
class TransferPlan:
    """Per-cache fetches ``(video, source)`` and evictions.

    ``source`` is the id of the cache the video is copied from, or ``None`` when
    it comes from the remote server. Videos are catalog indices.
    """

    fetches: list
    evictions: list
    local_bytes: int = 0
    remote_bytes: int = 0

    @property
    def empty(self) -> bool:
        return not any(self.fetches) and not any(self.evictions)


def plan_reoptimization(old_contents, new_p: Placement, cat: VideoCatalog) -> TransferPlan:
    """Moves that turn ``old_contents`` into ``new_p``, copying from peers when possible."""
    new_contents = new_p.contents()
    if len(old_contents) != len(new_contents):
        raise ValueError("old contents and new placement differ in cache count")
    holders = {}
    for i, videos in enumerate(old_contents):
        for k in videos:
            holders.setdefault(k, i)

    fetches, evictions = [], []
    local = remote = 0
    for i, (old, new) in enumerate(zip(old_contents, new_contents)):
        wanted = []
        for k in sorted(new - old):
            src = holders.get(k)
            wanted.append((k, src))
            if src is None:
                remote += int(cat.sizes[k])
            else:
                local += int(cat.sizes[k])
        fetches.append(wanted)
        evictions.append(sorted(old - new))
    return TransferPlan(fetches, evictions, local, remote)


def apply_plan(old_contents, plan: TransferPlan) -> list:
    out = []
    for old, fetched, evicted in zip(old_contents, plan.fetches, plan.evictions):
        out.append((set(old) - set(evicted)) | {k for k, _ in fetched})
    return out
