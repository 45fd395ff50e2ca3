import numpy as np
import pytest

from raceduel.track import TrackModel


@pytest.fixture
def track():
    return TrackModel()


def test_defaults(track):
    assert track.length == 1500.0
    assert track.half_width_left == 7.5
    assert track.half_width_right == 7.5
    assert track.reference_heading(123.0) == 0.0
    assert track.reference_curvature(123.0) == 0.0


def test_invalid_dimensions():
    with pytest.raises(ValueError):
        TrackModel(length=0.0)
    with pytest.raises(ValueError):
        TrackModel(half_width_left=-1.0)


def test_to_cartesian_identity(track):
    assert track.to_cartesian(0.0, 0.0) == (0.0, 0.0)
    assert track.to_cartesian(100.0, 3.0) == (100.0, 3.0)
    assert track.to_cartesian(1500.0, -7.5) == (1500.0, -7.5)


def test_to_cartesian_arrays(track):
    s = np.array([0.0, 10.0, 20.0])
    n = np.array([1.0, -1.0, 0.0])
    x, y = track.to_cartesian(s, n)
    assert np.array_equal(x, s)
    assert np.array_equal(y, n)


def test_within_bounds_examples(track):
    half_width = 1.93 / 2.0
    assert track.within_bounds(0.0, half_width)
    # 7.5 - 0.964 sits just outside the corridor inset by d_w/2
    assert not track.within_bounds(7.5 - 0.964, half_width)
    # boundary-touching case is inside (closed interval)
    assert track.within_bounds(-7.5 + half_width, half_width)


def test_within_bounds_monotone_in_margin(track):
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = rng.uniform(-9.0, 9.0)
        m1 = rng.uniform(0.0, 3.0)
        m2 = rng.uniform(0.0, m1)
        if track.within_bounds(n, m1):
            assert track.within_bounds(n, m2)


def test_negative_margin_rejected(track):
    with pytest.raises(ValueError):
        track.within_bounds(0.0, -0.1)


def test_lateral_limits_symmetry(track):
    lo, hi = track.lateral_limits(0.965)
    assert lo == -hi
    assert hi == 7.5 - 0.965
