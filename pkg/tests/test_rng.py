import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pcwlab import rng


def test_uniform_open_interval_and_deterministic():
    u = rng.uniform(5, "x", np.arange(100_000), 3)
    assert np.all((u > 0) & (u < 1))
    assert np.array_equal(u, rng.uniform(5, "x", np.arange(100_000), 3))


def test_single_draw_replays_in_isolation():
    batch = rng.uniform(9, "pool", np.arange(1000), 2)
    assert batch[737] == rng.Stream(9, "pool", 737).uniform(2)


def test_uniform_chi_square():
    u = rng.uniform(1, "chi", np.arange(1_000_000), 0)
    counts = np.bincount((u * 100).astype(int), minlength=100)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_streams_differ_by_tag_seed_key_draw():
    base = rng.uniform(1, "a", np.arange(1000), 0)
    for other in (rng.uniform(2, "a", np.arange(1000), 0), rng.uniform(1, "b", np.arange(1000), 0),
                  rng.uniform(1, "a", np.arange(1, 1001), 0), rng.uniform(1, "a", np.arange(1000), 1)):
        assert abs(np.corrcoef(base, other)[0, 1]) < 0.1
        assert not np.any(base == other)


def test_normal_moments():
    z = rng.normal(3, "n", np.arange(400_000), 0, 2.0, 0.5)
    assert abs(z.mean() - 2.0) < 4 * 0.5 / np.sqrt(len(z))
    assert abs(z.std() - 0.5) < 0.005
    assert stats.kstest((z - 2.0) / 0.5, "norm").pvalue > 1e-3


def test_integers_uniform_chi_square():
    k = rng.integers(4, "i", np.arange(1_000_000), 0, 601)
    assert k.min() == 0 and k.max() == 600
    assert stats.chisquare(np.bincount(k, minlength=601)).pvalue > 1e-3


def test_negative_keys_rejected():
    with pytest.raises(ValueError):
        rng.uniform(0, "x", -1)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**63), key=st.integers(0, 2**62), draw=st.integers(0, 10_000),
       n=st.integers(1, 10_000))
def test_integer_always_in_range(seed, key, draw, n):
    s = rng.Stream(seed, "h", key)
    assert 0 <= s.integer(n, draw) < n
    assert 0.0 < s.uniform(draw) < 1.0
