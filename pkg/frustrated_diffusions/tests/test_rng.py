
import numpy as np
import pytest

from frustrated_diffusions.core.errors import ParameterError
from frustrated_diffusions.core.rng import (
    INCREMENTS,
    INITIAL,
    REPLICA_SHIFT,
    brownian_increments,
    derive_stream,
    normal_block,
    normal_increment,
    uniform_block,
)
from frustrated_diffusions.schemas import RngStream


def test_draws_are_pure_functions_of_their_coordinates():
    s = RngStream(seed=42, stream_id=3)
    assert np.array_equal(normal_block(s, 17, 64), normal_block(s, 17, 64))
    assert normal_increment(s, 5) == normal_increment(RngStream(seed=42, stream_id=3), 5)


def test_lane_values_do_not_depend_on_block_width():
    s = RngStream(seed=1, stream_id=0)
    wide = normal_block(s, 9, 1000)
    assert np.array_equal(normal_block(s, 9, 3), wide[:3])
    assert normal_increment(s, 9) == wide[0]


def test_streams_and_steps_are_distinct():
    a = normal_block(RngStream(seed=1, stream_id=0), 0, 32)
    b = normal_block(RngStream(seed=1, stream_id=1), 0, 32)
    c = normal_block(RngStream(seed=2, stream_id=0), 0, 32)
    d = normal_block(RngStream(seed=1, stream_id=0), 1, 32)
    for other in (b, c, d):
        assert not np.array_equal(a, other)


def test_normal_moments():
    z = normal_block(RngStream(seed=2024, stream_id=0), 0, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert np.all(np.isfinite(z))


def test_uniforms_in_unit_interval():
    u = uniform_block(RngStream(seed=5, stream_id=0), 0, 50_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_brownian_increments_select_lanes():
    s = RngStream(seed=3, stream_id=0)
    dw = brownian_increments(s, 4, 0.01, (0, 5))
    assert dw.shape == (4, 2)
    for k in range(4):
        block = normal_block(s, k, 6)
        assert dw[k, 0] == pytest.approx(0.1 * block[0], rel=0, abs=1e-15)
        assert dw[k, 1] == pytest.approx(0.1 * block[5], rel=0, abs=1e-15)


def test_derived_streams_separate_purposes():
    a = derive_stream(9, INCREMENTS, 4)
    b = derive_stream(9, INITIAL, 4)
    assert a.stream_id != b.stream_id
    assert b.stream_id >> REPLICA_SHIFT == INITIAL
    with pytest.raises(ParameterError):
        derive_stream(9, INCREMENTS, 1 << REPLICA_SHIFT)
