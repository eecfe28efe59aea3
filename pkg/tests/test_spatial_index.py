import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from digfill.errors import NonPositiveCellSize, NonPositiveRadius
from digfill.spatial_index import PointSet, build_index, query_radius


def linear_scan(coords, center, r):
    return {i for i, p in enumerate(coords) if float(((p - center) ** 2).sum()) <= r * r}


def test_empty_pointset():
    idx = build_index(PointSet(np.empty((0, 3))), 1.0)
    assert idx.buckets == {}


def test_four_points_one_cell():
    ps = PointSet([[0.1, 0.1], [0.2, 0.9], [0.9, 0.5], [0.5, 0.5]])
    idx = build_index(ps, 1.0)
    assert len(idx.buckets) == 1
    assert sorted(next(iter(idx.buckets.values())).tolist()) == [0, 1, 2, 3]


def test_buckets_cover_all_points():
    ps = PointSet(np.random.default_rng(0).uniform(-50, 50, (1000, 3)))
    idx = build_index(ps, 3.0)
    members = np.concatenate(list(idx.buckets.values()))
    assert sorted(members.tolist()) == list(range(1000))


def test_query_contains_self():
    ps = PointSet(np.random.default_rng(1).normal(size=(30, 2)))
    idx = build_index(ps, 0.5)
    for i, p in enumerate(ps.coords):
        assert i in query_radius(idx, ps, p, 1e-6)


def test_two_points_just_out_of_reach():
    ps = PointSet([[0.0, 0.0], [5.0, 0.0]])
    idx = build_index(ps, 4.9)
    assert query_radius(idx, ps, ps.coords[0], 4.9) == {0}
    assert query_radius(idx, ps, ps.coords[1], 4.9) == {1}


def test_boundary_is_inclusive():
    ps = PointSet([[0.0, 0.0], [3.0, 4.0]])
    assert query_radius(build_index(ps, 5.0), ps, [0.0, 0.0], 5.0) == {0, 1}


def test_random_queries_match_linear_scan():
    rng = np.random.default_rng(2)
    ps = PointSet(rng.uniform(0, 20, (500, 3)))
    idx = build_index(ps, 1.5)
    for _ in range(50):
        c = rng.uniform(0, 20, 3)
        r = float(rng.uniform(0.1, 4.0))
        assert query_radius(idx, ps, c, r) == linear_scan(ps.coords, c, r)


def test_bad_parameters():
    ps = PointSet([[0.0, 0.0]])
    with pytest.raises(NonPositiveCellSize):
        build_index(ps, 0.0)
    with pytest.raises(NonPositiveRadius):
        query_radius(build_index(ps, 1.0), ps, [0.0, 0.0], -1.0)


@settings(max_examples=150)
@given(
    n=st.integers(0, 80),
    dim=st.sampled_from([2, 3]),
    cell=st.floats(0.05, 5.0),
    r=st.floats(0.05, 6.0),
    seed=st.integers(0, 2**31),
)
def test_grid_matches_brute_force(n, dim, cell, r, seed):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-5, 5, (n, dim))
    ps = PointSet(coords)
    idx = build_index(ps, cell)
    center = rng.uniform(-6, 6, dim)
    assert query_radius(idx, ps, center, r) == linear_scan(coords, center, r)


@settings(max_examples=50)
@given(n=st.integers(1, 60), seed=st.integers(0, 2**31))
def test_insertion_order_irrelevant(n, seed):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 4, (n, 2))
    perm = rng.permutation(n)
    a, b = PointSet(coords), PointSet(coords[perm])
    ia, ib = build_index(a, 0.7), build_index(b, 0.7)
    c = rng.uniform(0, 4, 2)
    got_a = query_radius(ia, a, c, 0.9)
    got_b = {int(perm[j]) for j in query_radius(ib, b, c, 0.9)}
    assert got_a == got_b
