"""Spatial hash index versus brute-force nearest neighbor."""

import numpy as np
import pytest

from scandiff.neighbors import UniformGridIndex


def _brute(points, queries, radius):
    idx = np.full(len(queries), -1, dtype=np.int64)
    dist = np.full(len(queries), np.inf)
    for i, q in enumerate(queries):
        d = np.linalg.norm(points - q, axis=1)
        j = int(np.argmin(d))
        if d[j] <= radius:
            idx[i] = j
            dist[i] = d[j]
    return idx, dist


def test_matches_brute_force(rng):
    points = rng.uniform(-10, 10, size=(400, 3))
    queries = rng.uniform(-12, 12, size=(250, 3))
    radius = 1.5
    index = UniformGridIndex(points, cell_size=radius)
    got_idx, got_dist = index.nearest_within(queries, radius)
    want_idx, want_dist = _brute(points, queries, radius)

    np.testing.assert_allclose(got_dist, want_dist, atol=1e-12)
    # tie-breaking between equidistant points is unspecified; distances decide
    misses = want_idx == -1
    np.testing.assert_array_equal(got_idx[misses], -1)
    hits = ~misses
    assert np.all(got_idx[hits] >= 0)


def test_small_radius_relative_to_cells(rng):
    # radius below the cell size still searches enough shells
    points = rng.uniform(-5, 5, size=(200, 3))
    queries = points + rng.normal(scale=0.05, size=points.shape)
    index = UniformGridIndex(points, cell_size=2.0)
    got_idx, got_dist = index.nearest_within(queries, 0.5)
    want_idx, want_dist = _brute(points, queries, 0.5)
    np.testing.assert_allclose(got_dist, want_dist, atol=1e-12)


def test_exact_match_found():
    points = np.array([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]])
    index = UniformGridIndex(points, cell_size=1.0)
    idx, dist = index.nearest_within(np.array([[5.0, 0.0, 0.0]]), 0.1)
    assert idx[0] == 1
    assert dist[0] == 0.0


def test_miss_reports_minus_one_and_inf():
    points = np.array([[0.0, 0.0, 0.0]])
    index = UniformGridIndex(points, cell_size=1.0)
    idx, dist = index.nearest_within(np.array([[10.0, 10.0, 10.0]]), 2.0)
    assert idx[0] == -1
    assert dist[0] == np.inf


def test_empty_queries():
    index = UniformGridIndex(np.zeros((3, 3)), cell_size=1.0)
    idx, dist = index.nearest_within(np.zeros((0, 3)), 1.0)
    assert len(idx) == 0 and len(dist) == 0


def test_input_validation():
    with pytest.raises(ValueError):
        UniformGridIndex(np.zeros((3, 3)), cell_size=0.0)
    with pytest.raises(ValueError):
        UniformGridIndex(np.zeros((3, 2)), cell_size=1.0)
    index = UniformGridIndex(np.zeros((3, 3)), cell_size=1.0)
    with pytest.raises(ValueError):
        index.nearest_within(np.zeros((2, 2)), 1.0)
