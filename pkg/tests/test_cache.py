"""Duration-bounded FIFO cache properties."""

import numpy as np
import pytest

from selftalk.cache import UtteranceCache
from selftalk.segmenter import Segment


def replay_oracle(durations, budget=30.0):
    """Plain-list replay: evict from the front until the new entry fits.

    Returns the final kept durations and the eviction count history.
    """
    kept = []
    evictions = []
    for d in durations:
        n = 0
        while kept and sum(kept) + d > budget:
            kept.pop(0)
            n += 1
        if not kept and d > budget:
            kept = [d]
        else:
            kept.append(d)
        evictions.append(n)
    return kept, evictions


def push_all(durations, budget=30.0):
    cache = UtteranceCache(budget_s=budget)
    counts = []
    actual = []
    t = 0.0
    for d in durations:
        seg = Segment(t, t + d)
        # Endpoint subtraction can differ from d by an ulp; the oracle
        # must see the same durations the cache sees.
        actual.append(seg.duration_s)
        counts.append(len(cache.push(seg, payload=seg.duration_s)))
        t += d + 0.01
    return cache, counts, actual


def test_fits_without_eviction():
    cache, counts, _ = push_all([10.0, 10.0, 10.0])
    assert counts == [0, 0, 0]
    assert cache.total_s == pytest.approx(30.0)


def test_evicts_oldest_first():
    cache, counts, _ = push_all([10.0, 10.0, 10.0, 5.0])
    assert counts == [0, 0, 0, 1]
    assert [e.payload for e in cache.entries()] == pytest.approx([10.0, 10.0, 5.0])


def test_oversize_entry_stored_alone_and_flagged():
    cache, counts, _ = push_all([5.0, 31.0])
    assert counts == [0, 1]
    assert len(cache) == 1
    assert cache.oversize
    assert cache.total_s == pytest.approx(31.0)
    # The next fitting push evicts the oversize resident and clears the flag.
    evicted = cache.push(Segment(100.0, 102.0))
    assert len(evicted) == 1
    assert not cache.oversize


def test_entries_are_oldest_first_snapshot():
    cache, _, _ = push_all([1.0, 2.0, 3.0])
    assert [e.payload for e in cache.entries()] == pytest.approx([1.0, 2.0, 3.0])


def test_random_sequences_match_replay_oracle():
    rng = np.random.default_rng(21)
    for _ in range(200):
        durations = [float(rng.uniform(0.3, 12.0))
                     for _ in range(int(rng.integers(1, 40)))]
        cache, counts, actual = push_all(durations)
        kept, evictions = replay_oracle(actual)
        assert counts == evictions
        got = [e.payload for e in cache.entries()]
        assert got == kept
        # FIFO-suffix: the cache holds exactly the most recent pushes.
        assert got == actual[len(actual) - len(got):]
        if not cache.oversize:
            assert cache.total_s <= 30.0 + 1e-9
