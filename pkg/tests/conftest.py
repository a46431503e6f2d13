"""Shared instance builders and independent reference solvers for the tests."""

import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from collabcache.model import CachePool, DelayParams, VideoCatalog


def make_instance(sizes, pi, caps, d=1.0, D=10.0):
    cat = VideoCatalog(np.arange(len(sizes)), np.asarray(sizes), np.asarray(pi, dtype=float))
    return cat, CachePool(np.asarray(caps)), DelayParams(d, D)


def exhaustive_opt(cat, pool, dp):
    """Plain enumeration of every binary matrix; only for N*K <= ~16."""
    N, K = pool.N, cat.K
    pi, s = cat.popularity, cat.sizes
    rows = []
    for i in range(N):
        fits = [m for m in itertools.product((0, 1), repeat=K) if np.dot(m, s) <= pool.capacities[i]]
        rows.append(fits)
    best = -1.0
    for combo in itertools.product(*rows):
        x = np.array(combo)
        n = x.sum(axis=0)
        val = float(np.sum(pi * (dp.d * n + N * (dp.D - dp.d) * np.minimum(n, 1))))
        best = max(best, val)
    return best


def lp_fractional_opt(cat, pool, dp):
    """Relaxed optimum via scipy's LP solver.

    Variables are z[i, k] (bytes of k at i) and u[k] (covered bytes of k), with
    u_k <= s_k and u_k <= sum_i z_ik.
    """
    from scipy.optimize import linprog

    N, K = pool.N, cat.K
    w = cat.popularity / cat.sizes
    c = np.concatenate([np.tile(-dp.d * w, N), -N * (dp.D - dp.d) * w])
    A, b = [], []
    for i in range(N):
        row = np.zeros(N * K + K)
        row[i * K:(i + 1) * K] = 1
        A.append(row)
        b.append(pool.capacities[i])
    for k in range(K):
        row = np.zeros(N * K + K)
        row[N * K + k] = 1
        row[k:N * K:K] = -1
        A.append(row)
        b.append(0.0)
    bounds = [(0, float(s)) for s in np.tile(cat.sizes, N)] + [(0, float(s)) for s in cat.sizes]
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b, dtype=float), bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun


@st.composite
def unit_instances(draw, max_n=4, max_k=8):
    N = draw(st.integers(1, max_n))
    K = draw(st.integers(2, max_k))
    caps = draw(st.lists(st.integers(1, 5), min_size=N, max_size=N))
    raw = draw(st.lists(st.integers(1, 10**6), min_size=K, max_size=K, unique=True))
    d = draw(st.floats(0.0, 5.0))
    gap = draw(st.floats(0.01, 10.0))
    return make_instance([1] * K, np.array(raw) / sum(raw), caps, d, d + gap)


@st.composite
def general_instances(draw, max_n=4, max_k=8, min_cap_factor=0):
    N = draw(st.integers(1, max_n))
    K = draw(st.integers(1, max_k))
    sizes = draw(st.lists(st.integers(1, 20), min_size=K, max_size=K))
    lo = min_cap_factor * max(sizes)
    caps = draw(st.lists(st.integers(lo, lo + 60), min_size=N, max_size=N))
    pi = draw(st.lists(st.integers(0, 1000), min_size=K, max_size=K))
    d = draw(st.floats(0.0, 3.0))
    gap = draw(st.floats(0.05, 10.0))
    return make_instance(sizes, np.array(pi, dtype=float), caps, d, d + gap)


@pytest.fixture
def two_cache_unit_instance():
    return make_instance([1, 1, 1, 1], [0.4, 0.3, 0.2, 0.1], [2, 2], 1.0, 10.0)


@pytest.fixture
def three_video_instance():
    return make_instance([6, 6, 6], [0.5, 0.3, 0.2], [10, 10], 1.0, 10.0)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
