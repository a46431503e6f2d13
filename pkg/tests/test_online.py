import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabcache.model import Placement, VideoCatalog
from collabcache.online import (
    PopularityEstimator,
    apply_plan,
    ewma_update,
    plan_reoptimization,
    should_reoptimize,
)


def test_ewma_formula():
    est = PopularityEstimator(np.array([0.2]), window=100, alpha=0.5)
    assert ewma_update(est, np.array([30])).estimates[0] == pytest.approx(0.25)


def test_ewma_endpoints():
    est = PopularityEstimator(np.array([0.2, 0.1, 0.0]), window=50, alpha=0.0)
    assert ewma_update(est, np.array([5, 0, 9])).estimates.tolist() == [0.2, 0.1, 0.0]
    est = PopularityEstimator(np.array([0.2, 0.1, 0.0]), window=50, alpha=1.0)
    assert ewma_update(est, np.array([5, 0, 9])).estimates.tolist() == [0.1, 0.0, 0.18]


def test_ewma_unrequested_videos_decay():
    est = PopularityEstimator(np.array([0.4, 0.6]), window=10, alpha=0.25)
    new = ewma_update(est, np.array([10, 0]))
    assert new.estimates[1] == pytest.approx(0.6 * 0.75)
    assert new.last_counts.tolist() == [10, 0]


def test_ewma_rejects_bad_counts():
    est = PopularityEstimator.cold(2, window=10, alpha=0.5)
    with pytest.raises(ValueError):
        ewma_update(est, np.array([1, -1]))
    with pytest.raises(ValueError):
        ewma_update(est, np.array([1, 1, 1]))
    with pytest.raises(ValueError):
        PopularityEstimator.cold(2, window=0, alpha=0.5)
    with pytest.raises(ValueError):
        PopularityEstimator.cold(2, window=5, alpha=1.5)


def test_estimator_grows_with_zero_prior():
    est = PopularityEstimator(np.array([0.3]), window=10, alpha=0.5).grow(3)
    assert est.estimates.tolist() == [0.3, 0.0, 0.0]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8).flatmap(lambda k: st.lists(
    st.lists(st.integers(0, 20), min_size=k, max_size=k), min_size=1, max_size=10)),
    st.floats(0, 1))
def test_ewma_stays_in_unit_interval(windows, alpha):
    W = 20
    est = PopularityEstimator.cold(len(windows[0]), W, alpha)
    for counts in windows:
        est = ewma_update(est, np.array(counts))
        assert np.all(est.estimates >= 0) and np.all(est.estimates <= 1 + 1e-12)


def test_should_reoptimize():
    a = np.array([0.5, 0.3, 0.2])
    assert not should_reoptimize(a, a.copy())
    assert should_reoptimize(a, np.array([0.5, 0.2, 0.3]), 0.0)
    assert not should_reoptimize(a, np.array([0.0, 0.0, 1.0]), 2.0)
    # only the shape of the distribution matters
    assert not should_reoptimize(a, 2 * a)
    with pytest.raises(ValueError):
        should_reoptimize(a, np.ones(2))


def _catalog(sizes):
    return VideoCatalog(np.arange(len(sizes)), np.array(sizes))


def test_plan_fixed_point():
    cat = _catalog([3, 4])
    plan = plan_reoptimization([{0}, {1}], Placement.from_contents([{0}, {1}], 2), cat)
    assert plan.empty and plan.local_bytes == 0 and plan.remote_bytes == 0


def test_plan_moves_video_locally():
    cat = _catalog([3, 4, 5])
    plan = plan_reoptimization([set(), {2}, set()], Placement.from_contents([set(), set(), {2}], 3), cat)
    assert plan.fetches == [[], [], [(2, 1)]]
    assert plan.evictions == [[], [2], []]
    assert plan.remote_bytes == 0 and plan.local_bytes == 5


def test_plan_cold_start_all_remote():
    cat = _catalog([3, 4, 5])
    new = Placement.from_contents([{0, 1}, {1, 2}], 3)
    plan = plan_reoptimization([set(), set()], new, cat)
    assert all(src is None for f in plan.fetches for _, src in f)
    assert plan.remote_bytes == int(new.used_bytes(cat).sum())
    assert plan.local_bytes == 0


def test_plan_prefers_lowest_id_source():
    cat = _catalog([3, 4])
    plan = plan_reoptimization([set(), {0}, {0}, set()], Placement.from_contents([set(), {0}, {0}, {0}], 2), cat)
    assert plan.fetches[3] == [(0, 1)]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 8), st.data())
def test_plan_conserves_contents_and_minimises_remote(n, k, data):
    sizes = data.draw(st.lists(st.integers(1, 9), min_size=k, max_size=k))
    cat = _catalog(sizes)
    sets = st.sets(st.integers(0, k - 1))
    old = [data.draw(sets) for _ in range(n)]
    new = Placement.from_contents([data.draw(sets) for _ in range(n)], k)
    plan = plan_reoptimization(old, new, cat)
    assert apply_plan(old, plan) == new.contents()
    present = set().union(*old)
    expected_remote = sum(sizes[v] for i, row in enumerate(new.contents()) for v in row - old[i] if v not in present)
    assert plan.remote_bytes == expected_remote
    for fetched in plan.fetches:
        for v, src in fetched:
            assert (src is None) == (v not in present)
            assert src is None or v in old[src]
