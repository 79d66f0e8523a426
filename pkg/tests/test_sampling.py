import numpy as np
import pytest
from hypothesis import given, strategies as st

from divattn.core import make_rng
from divattn.errors import InvalidInputError
from divattn.sampling import chunk_bounds, first_frame_sample, restricted_random_sample


def test_forced_when_one_frame_per_chunk():
    assert restricted_random_sample(6, 6, make_rng(1)) == [0, 1, 2, 3, 4, 5]


def test_structural_bound_t12(rng):
    for _ in range(100):
        idx = restricted_random_sample(12, 6, rng)
        assert all(2 * i <= x < 2 * i + 2 for i, x in enumerate(idx))


def test_short_video_cyclic_padding(rng):
    assert restricted_random_sample(4, 6, rng) == [0, 1, 2, 3, 0, 1]
    assert first_frame_sample(4, 6) == [0, 1, 2, 3, 0, 1]


def test_first_frame_examples():
    assert first_frame_sample(12, 6) == [0, 2, 4, 6, 8, 10]
    assert first_frame_sample(6, 6) == [0, 1, 2, 3, 4, 5]
    assert first_frame_sample(7, 6) == [0, 1, 2, 3, 4, 5]
    assert chunk_bounds(7, 6)[-1] == (5, 7)


@pytest.mark.parametrize("T,N", [(0, 6), (6, 0), (-1, 3)])
def test_invalid(T, N, rng):
    with pytest.raises(InvalidInputError):
        restricted_random_sample(T, N, rng)
    with pytest.raises(InvalidInputError):
        first_frame_sample(T, N)


@given(st.integers(1, 200), st.integers(1, 12), st.integers(0, 2**32))
def test_indices_increase_and_stay_in_chunks(T, N, seed):
    idx = restricted_random_sample(T, N, make_rng(seed))
    assert len(idx) == N
    assert all(0 <= i < T for i in idx)
    if T >= N:
        bounds = chunk_bounds(T, N)
        assert all(a <= i < b for i, (a, b) in zip(idx, bounds))
        assert all(x < y for x, y in zip(idx, idx[1:]))
        sizes = [b - a for a, b in bounds]
        assert max(sizes) - min(sizes) <= 1


def test_deterministic():
    assert restricted_random_sample(50, 6, make_rng(3)) == restricted_random_sample(50, 6, make_rng(3))


def test_uniform_within_chunk():
    rng = make_rng(2024)
    counts = np.zeros(12)
    trials = 10_000
    for _ in range(trials):
        for i in restricted_random_sample(12, 6, rng):
            counts[i] += 1
    assert np.all(np.abs(counts / trials - 0.5) <= 0.05)
