"""Reduce a variable-length video to N frames, one per contiguous chunk."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

DEFAULT_CHUNKS = 6


def _check(total_frames: int, chunks: int) -> None:
    if int(total_frames) < 1 or int(chunks) < 1:
        raise InvalidInputError(
            f"need frames >= 1 and chunks >= 1, got frames={total_frames} chunks={chunks}"
        )


def chunk_bounds(total_frames: int, chunks: int) -> list[tuple[int, int]]:
    """Half-open ``[start, stop)`` ranges of each chunk.

    Chunk ``n`` covers ``[floor(n*T/N), floor((n+1)*T/N))``. For ``T < N``
    the frame sequence is padded cyclically to length N, so every chunk is a
    single (possibly repeated) frame and the ranges index the padded sequence.
    """
    _check(total_frames, chunks)
    T, N = int(total_frames), int(chunks)
    if T < N:
        return [(n, n + 1) for n in range(N)]
    return [((n * T) // N, ((n + 1) * T) // N) for n in range(N)]


def _unpad(index: int, total_frames: int) -> int:
    return index % total_frames


def restricted_random_sample(total_frames: int, chunks: int, rng: np.random.Generator) -> list[int]:
    """Draw one frame uniformly from each chunk."""
    bounds = chunk_bounds(total_frames, chunks)
    out = []
    for start, stop in bounds:
        idx = start if stop - start == 1 else int(rng.integers(start, stop))
        out.append(_unpad(idx, total_frames))
    return out


def first_frame_sample(total_frames: int, chunks: int) -> list[int]:
    """Deterministic test-time variant: the first frame of each chunk."""
    return [_unpad(start, total_frames) for start, _ in chunk_bounds(total_frames, chunks)]
