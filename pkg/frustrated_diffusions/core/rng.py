# frustrated_diffusions/core/rng.py
"""Counter-based random streams.

Every draw is a pure function of (seed, stream_id, step, lane): a Philox block
keyed by (seed, stream_id) with the step index in the second counter word. Lane j
of a block always consumes words 2j and 2j+1, so its value does not depend on how
many lanes a caller asks for.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from frustrated_diffusions.core.errors import ParameterError
from frustrated_diffusions.schemas import RngStream

_MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0**-53
_TWO_PI = 2.0 * np.pi

# stream purposes, kept in the top 16 bits of stream_id
INCREMENTS = 0
INITIAL = 1
PICARD = 2
TILDE = 3
REPLICA_SHIFT = 48


def derive_stream(seed: int, purpose: int, index: int = 0) -> RngStream:
    """Stream for `purpose` (INCREMENTS, INITIAL, ...) of replica `index` under `seed`."""
    if not 0 <= index < (1 << REPLICA_SHIFT):
        raise ParameterError(f"replica index out of range: {index}")
    return RngStream(seed=seed, stream_id=(purpose << REPLICA_SHIFT) | index)


def _raw_words(stream: RngStream, k: int, n_words: int) -> np.ndarray:
    key = np.array([stream.seed & _MASK64, stream.stream_id & _MASK64], dtype=np.uint64)
    counter = np.array([0, k & _MASK64, 0, 0], dtype=np.uint64)
    gen = np.random.Philox(counter=counter, key=key)
    return gen.random_raw(n_words)


def _unit_open_closed(words: np.ndarray) -> np.ndarray:
    # (0, 1]: safe under log
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53


def _unit_closed_open(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53


def normal_block(stream: RngStream, k: int, n: int) -> np.ndarray:
    """Standard normals for lanes 0..n-1 at step k (Box-Muller, cosine branch)."""
    if n <= 0:
        return np.empty(0, dtype=np.float64)
    words = _raw_words(stream, k, 2 * n)
    u1 = _unit_open_closed(words[0::2])
    u2 = _unit_closed_open(words[1::2])
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def uniform_block(stream: RngStream, k: int, n: int) -> np.ndarray:
    """Uniforms on [0, 1) for lanes 0..n-1 at step k."""
    if n <= 0:
        return np.empty(0, dtype=np.float64)
    words = _raw_words(stream, k, 2 * n)
    return _unit_closed_open(words[0::2])


def normal_increment(stream: RngStream, k: int) -> float:
    """The k-th standard normal draw of the stream (lane 0 of step k)."""
    return float(normal_block(stream, k, 1)[0])


def brownian_increments(stream: RngStream, steps: int, dt: float, lanes: Sequence[int]) -> np.ndarray:
    """Brownian increments sqrt(dt)*xi for the given lanes, shape (steps, len(lanes))."""
    lanes = np.asarray(lanes, dtype=np.int64)
    if lanes.size == 0:
        return np.zeros((steps, 0))
    width = int(lanes.max()) + 1
    out = np.empty((steps, lanes.size))
    scale = np.sqrt(dt)
    for k in range(steps):
        out[k] = normal_block(stream, k, width)[lanes]
    return scale * out


__all__ = [
    "INCREMENTS",
    "INITIAL",
    "PICARD",
    "TILDE",
    "derive_stream",
    "normal_block",
    "uniform_block",
    "normal_increment",
    "brownian_increments",
]
