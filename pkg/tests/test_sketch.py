import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnscpm.sketch import (
    COUNTER_MAX,
    CountMinSketch,
    DistinctWeightedSampler,
    ThresholdSampler,
    cms_add,
    cms_estimate,
    cms_reset,
    dwshh_add,
    dwshh_estimate,
    ws_add,
    ws_estimate,
)


def test_single_insert():
    s = cms_add(CountMinSketch(), "a.com")
    assert cms_estimate(s, "a.com") == 1
    assert cms_estimate(s, "b.com") in (0, 1)


def test_six_inserts_exact():
    s = CountMinSketch(d=5, w=200)
    for _ in range(6):
        s.add("a.com")
    assert s.estimate("a.com") == 6


def test_unseen_key_on_empty_sketch():
    assert CountMinSketch().estimate("nothing.example") == 0


def test_thousand_distinct_within_bound():
    s = CountMinSketch(d=5, w=200, seed=1)
    keys = [f"d{i}.com" for i in range(1000)]
    for k in keys:
        s.add(k)
    bound = 1 + s.epsilon * 1000
    estimates = [s.estimate(k) for k in keys]
    assert min(estimates) >= 1
    # the bound holds per key with probability 1 - e^-5
    over = sum(e > bound for e in estimates)
    assert over <= 3 * s.delta * 1000


def test_rows_use_distinct_hashes():
    s = CountMinSketch(d=5, w=200, seed=0)
    cols = [s.columns(f"k{i}") for i in range(200)]
    for row in range(1, 5):
        assert [c[0] for c in cols] != [c[row] for c in cols]


def test_columns_in_range_and_stable():
    a = CountMinSketch(d=4, w=37, seed=9)
    b = CountMinSketch(d=4, w=37, seed=9)
    for i in range(500):
        ca = a.columns(i)
        assert all(0 <= c < 37 for c in ca)
        assert ca == b.columns(i)


def test_saturation():
    s = CountMinSketch(d=2, w=4)
    s.add("x", COUNTER_MAX - 1)
    s.add("x", 5)
    assert s.estimate("x") == COUNTER_MAX


def test_reset_zeroes_and_replays():
    rng = random.Random(4)
    stream = [rng.randrange(300) for _ in range(3000)]
    s = CountMinSketch(d=3, w=50, seed=2)
    for k in stream:
        s.add(k)
    first = [s.estimate(k) for k in range(300)]
    cms_reset(s)
    assert all(s.estimate(k) == 0 for k in range(300))
    for k in stream:
        s.add(k)
    assert [s.estimate(k) for k in range(300)] == first


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 60), max_size=400),
    st.integers(1, 4),
    st.integers(1, 30),
    st.integers(0, 2**32),
)
def test_one_sided_error(stream, d, w, seed):
    s = CountMinSketch(d=d, w=w, seed=seed)
    for k in stream:
        s.add(k)
    exact = Counter(stream)
    total = len(stream)
    for k in range(61):
        est = s.estimate(k)
        assert exact[k] <= est <= total


def test_mean_overestimate_under_load():
    """10,000 inserts into w=100: the mean overestimate stays under e/w * N."""
    rng = random.Random(11)
    errors = []
    for trial in range(20):
        stream = rng.choices(range(3000), k=10_000)
        s = CountMinSketch(d=3, w=100, seed=trial)
        for k in stream:
            s.add(k)
        exact = Counter(stream)
        errors.extend(s.estimate(k) - c for k, c in exact.items())
    errors.sort()
    eps_n = math.e / 100 * 10_000
    assert sum(errors) / len(errors) <= eps_n
    assert errors[int(0.95 * len(errors))] <= eps_n


def test_epsilon_delta():
    s = CountMinSketch(d=5, w=200)
    assert s.epsilon == pytest.approx(0.01359, abs=1e-5)
    assert s.delta == pytest.approx(math.exp(-5))
    assert s.memory_bytes == 4000


@pytest.mark.parametrize("d,w", [(0, 10), (3, 0)])
def test_bad_shape(d, w):
    with pytest.raises(ValueError):
        CountMinSketch(d=d, w=w)


# --- reference samplers -------------------------------------------------------


def test_dwshh_under_capacity_is_exact():
    s = DistinctWeightedSampler(k=100, seed=1)
    rng = random.Random(0)
    stream = rng.choices([f"k{i}" for i in range(10)], k=500)
    for key in stream:
        dwshh_add(s, key)
    for key, c in Counter(stream).items():
        assert dwshh_estimate(s, key) == c


def test_dwshh_keeps_heavy_hitter():
    rng = random.Random(5)
    stream = ["heavy"] * 1000 + [f"k{i}" for i in range(1000)]
    rng.shuffle(stream)
    s = DistinctWeightedSampler(k=10, seed=3)
    for key in stream:
        s.add(key)
    assert "heavy" in s.counts
    assert len(s.counts) <= 10
    assert s.estimate("heavy") > 500


def test_ws_samples_everything_above_threshold():
    s = ThresholdSampler(tau=0.01)
    stream = [f"k{i % 37}" for i in range(400)]
    for key in stream:
        ws_add(s, key)
    for key, c in Counter(stream).items():
        assert ws_estimate(s, key) == c


def test_ws_skips_light_items():
    s = ThresholdSampler(tau=2.0)
    s.add("light", 1.0)
    s.add("heavy", 3.0)
    assert s.estimate("light") == 0
    assert s.estimate("heavy") == 3.0
