import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabcache.sim.policies import (
    NEIGHBOR,
    REMOTE,
    SELF,
    collaborative_lfu_step,
    collaborative_lru_step,
    make_state,
)

STEP = {"lru": collaborative_lru_step, "lfu": collaborative_lfu_step}


@pytest.mark.parametrize("policy", ["lru", "lfu"])
def test_repeat_request_is_self_hit(policy):
    state = make_state(policy, [10, 10], [3, 4])
    first, state = STEP[policy](state, (0, 1))
    second, state = STEP[policy](state, (0, 1))
    assert first.kind == REMOTE and second.kind == SELF


@pytest.mark.parametrize("policy", ["lru", "lfu"])
def test_neighbor_hit_then_both_hold(policy):
    state = make_state(policy, [10, 10, 10], [3])
    _, state = STEP[policy](state, (1, 0))
    out, state = STEP[policy](state, (2, 0))
    assert out.kind == NEIGHBOR and out.source == 1
    assert state.contents() == [set(), {0}, {0}]


@pytest.mark.parametrize("policy", ["lru", "lfu"])
def test_lowest_id_neighbor_serves(policy):
    state = make_state(policy, [10, 10, 10], [3])
    _, state = STEP[policy](state, (2, 0))
    _, state = STEP[policy](state, (1, 0))
    out, state = STEP[policy](state, (0, 0))
    assert out.source == 1


def test_neighbor_serving_can_be_disabled():
    state = make_state("lru", [10, 10], [3], neighbor_serving=False)
    _, state = collaborative_lru_step(state, (0, 0))
    out, _ = collaborative_lru_step(state, (1, 0))
    assert out.kind == REMOTE


@pytest.mark.parametrize("policy", ["lru", "lfu"])
def test_full_eviction(policy):
    state = make_state(policy, [5], [5, 5])
    _, state = STEP[policy](state, (0, 0))
    _, state = STEP[policy](state, (0, 1))
    assert state.contents() == [{1}]


@pytest.mark.parametrize("policy", ["lru", "lfu"])
def test_oversized_video_passes_through(policy):
    state = make_state(policy, [5], [2, 9])
    _, state = STEP[policy](state, (0, 0))
    out, state = STEP[policy](state, (0, 1))
    assert out.kind == REMOTE and state.contents() == [{0}]


def test_lru_evicts_least_recent():
    state = make_state("lru", [6], [2, 2, 2, 2])
    for v in (0, 1, 2, 0, 3):
        _, state = collaborative_lru_step(state, (0, v))
    assert state.contents() == [{0, 2, 3}]


def test_lfu_evicts_least_frequent_then_least_recent():
    state = make_state("lfu", [6], [2, 2, 2, 2])
    for v in (0, 0, 1, 2, 1, 3):
        _, state = collaborative_lfu_step(state, (0, v))
    # counts: 0->2, 1->2, 2->1; video 2 goes
    assert state.contents() == [{0, 1, 3}]
    _, state = collaborative_lfu_step(state, (0, 2))
    # counts: 0->2 (older), 1->2, 3->1; video 3 goes
    assert state.contents() == [{0, 1, 2}]
    # frequency ties: 0 and 1 both at 2, video 0 used longer ago
    _, state = collaborative_lfu_step(state, (0, 2))
    _, state = collaborative_lfu_step(state, (0, 3))
    assert state.contents() == [{1, 2, 3}]


def test_lfu_counters_survive_eviction():
    state = make_state("lfu", [2], [2, 2])
    for v in (0, 0, 0, 1, 0):
        _, state = collaborative_lfu_step(state, (0, v))
    assert state.counts[0] == {0: 4, 1: 1}


def test_unknown_policy():
    with pytest.raises(ValueError):
        make_state("fifo", [1], [1])


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["lru", "lfu"]), st.integers(1, 4), st.data())
def test_capacity_never_exceeded(policy, n, data):
    sizes = data.draw(st.lists(st.integers(1, 8), min_size=1, max_size=12))
    caps = data.draw(st.lists(st.integers(0, 20), min_size=n, max_size=n))
    events = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, len(sizes) - 1)), max_size=80))
    state = make_state(policy, caps, sizes)
    for event in events:
        before = [set(c) for c in state.contents()]
        out, state = STEP[policy](state, event)
        cache, video = event
        held = [video in c for c in before]
        if held[cache]:
            assert out.kind == SELF
        elif any(held):
            assert out.kind == NEIGHBOR and out.source == held.index(True)
        else:
            assert out.kind == REMOTE
        used = [sum(sizes[v] for v in c) for c in state.contents()]
        assert used == state.used
        assert all(u <= c for u, c in zip(used, caps))
        assert (video in state.contents()[cache]) == (sizes[video] <= caps[cache])
