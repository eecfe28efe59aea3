import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from digfill.dbscan import Clustering
from digfill.errors import ClusterTooSmall, DegenerateSplit, NoExcavatorData
from digfill.moments import (TEST, TRAIN, ClusterMoments, MomentDataset, associate_excavator,
                             compute_moments, read_moments_csv, split_random, split_window,
                             write_moments_csv)
from digfill.spatial_index import PointSet
from digfill.telemetry import Role, TelemetryLog, TelemetryRecord
from oracles import two_pass_moments


def one_cluster(xy, times=None):
    xy = np.asarray(xy, dtype=float)
    ps = PointSet(np.column_stack([xy, np.zeros(len(xy))]))
    c = Clustering(np.zeros(len(xy), dtype=np.int64), np.ones(len(xy), bool), 1)
    return compute_moments(ps, c, times)[0]


def test_identical_points():
    m = one_cluster([[3, 7]] * 4)
    assert (m.mean_x, m.mean_y, m.std_x, m.std_y) == (3, 7, 0, 0)


def test_two_points_sample_std():
    m = one_cluster([[-1, 0], [1, 0]])
    assert (m.mean_x, m.mean_y) == (0, 0)
    assert m.std_x == pytest.approx(math.sqrt(2), rel=1e-15)
    assert m.std_y == 0


def test_random_cluster_matches_two_pass():
    xy = np.random.default_rng(0).normal([100, -40], [2, 5], (50, 2))
    m = one_cluster(xy)
    for got_mean, got_std, col in ((m.mean_x, m.std_x, xy[:, 0]), (m.mean_y, m.std_y, xy[:, 1])):
        ref_mean, ref_std = two_pass_moments(col.tolist())
        assert got_mean == pytest.approx(ref_mean, rel=1e-12)
        assert got_std == pytest.approx(ref_std, rel=1e-12)


def test_times_and_noise_handling():
    xy = np.array([[0, 0], [1, 0], [50, 50], [2, 0]], float)
    ps = PointSet(np.column_stack([xy, np.zeros(4)]))
    c = Clustering(np.array([0, 0, -1, 0]), np.ones(4, bool), 1)
    m = compute_moments(ps, c, [10.0, 20.0, 99.0, 40.0])[0]
    assert m.n_points == 3 and m.mean_x == 1.0
    assert (m.t_start, m.t_mid, m.t_end) == (10.0, 20.0, 40.0)


def test_cluster_too_small():
    ps = PointSet([[0.0, 0.0], [5.0, 5.0], [5.0, 6.0]])
    c = Clustering(np.array([0, 1, 1]), np.ones(3, bool), 2)
    with pytest.raises(ClusterTooSmall):
        compute_moments(ps, c)


@settings(max_examples=100)
@given(
    n=st.integers(2, 40),
    shift=st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)),
    seed=st.integers(0, 2**31),
)
def test_bbox_and_translation(n, shift, seed):
    xy = np.random.default_rng(seed).normal(0, 3, (n, 2))
    m = one_cluster(xy)
    assert xy[:, 0].min() <= m.mean_x <= xy[:, 0].max()
    assert xy[:, 1].min() <= m.mean_y <= xy[:, 1].max()
    m2 = one_cluster(xy + np.array(shift))
    assert m2.mean_x == pytest.approx(m.mean_x + shift[0], abs=1e-9)
    assert m2.mean_y == pytest.approx(m.mean_y + shift[1], abs=1e-9)
    assert m2.std_x == pytest.approx(m.std_x, rel=1e-6, abs=1e-9)
    assert m2.std_y == pytest.approx(m.std_y, rel=1e-6, abs=1e-9)


def exc_log(fixes):
    return TelemetryLog.from_records(
        [TelemetryRecord(t, x, y, 0.0, Role.EXCAVATOR, True) for t, x, y in fixes])


def test_associate_median_inside_span():
    m = ClusterMoments(0, 3, 0, 0, 1, 1, t_mid=15, t_start=10, t_end=20)
    log = exc_log([(5, 99, 99), (10, 10, 10), (15, 10, 12), (20, 12, 10), (25, 99, 99)])
    got = associate_excavator(m, log)
    assert (got.exc_x, got.exc_y) == (10, 10)


def test_associate_nearest_in_time_fallback():
    m = ClusterMoments(0, 3, 0, 0, 1, 1, t_mid=15, t_start=12, t_end=18)
    got = associate_excavator(m, exc_log([(0, 1, 1), (20, 5, 5), (40, 9, 9)]))
    assert (got.exc_x, got.exc_y) == (5, 5)


def test_associate_requires_fixes():
    m = ClusterMoments(0, 3, 0, 0, 1, 1, t_mid=15, t_start=12, t_end=18)
    with pytest.raises(NoExcavatorData):
        associate_excavator(m, TelemetryLog.from_records([]))


@settings(max_examples=50)
@given(seed=st.integers(0, 2**31))
def test_associate_matches_filter_then_median(seed):
    rng = np.random.default_rng(seed)
    fixes = [(float(t), float(x), float(y)) for t, x, y in
             zip(rng.uniform(0, 100, 200), rng.normal(0, 5, 200), rng.normal(0, 5, 200))]
    t0 = float(rng.uniform(0, 90))
    m = ClusterMoments(0, 3, 0, 0, 1, 1, t_mid=t0 + 5, t_start=t0, t_end=t0 + 10)
    got = associate_excavator(m, exc_log(fixes))
    inside = [(x, y) for t, x, y in fixes if t0 <= t <= t0 + 10]
    xs = sorted(p[0] for p in inside)
    ys = sorted(p[1] for p in inside)

    def med(v):
        k = len(v)
        return v[k // 2] if k % 2 else (v[k // 2 - 1] + v[k // 2]) / 2

    assert got.exc_x == pytest.approx(med(xs), rel=1e-12)
    assert got.exc_y == pytest.approx(med(ys), rel=1e-12)


def dataset(k):
    return MomentDataset.all_train(
        ClusterMoments(i, 5, i, 0, 1, 1, t_mid=100.0 * i, t_start=100.0 * i - 10,
                       t_end=100.0 * i + 10, exc_x=i, exc_y=1)
        for i in range(k))


def test_split_random_counts_and_determinism():
    ds = dataset(20)
    a = split_random(ds, 0.25, 11)
    assert a.split.count(TEST) == 5
    assert a == split_random(ds, 0.25, 11)
    with pytest.raises(DegenerateSplit):
        split_random(dataset(2), 0.999, 0)


@given(k=st.integers(2, 40), frac=st.floats(0.01, 0.99), seed=st.integers(0, 2**31))
def test_split_random_partitions(k, frac, seed):
    try:
        ds = split_random(dataset(k), frac, seed)
    except DegenerateSplit:
        return
    assert set(ds.split) <= {TRAIN, TEST}
    assert len(ds.train()) + len(ds.test()) == k
    assert ds.split.count(TEST) == math.floor(frac * k + 0.5)


def test_split_window():
    ds = dataset(30)
    with pytest.raises(DegenerateSplit):
        split_window(ds, 1e6, 2e6)
    with pytest.raises(DegenerateSplit):
        split_window(ds, -1, 1e6)
    w = split_window(ds, 1000, 1900)
    expected = [TEST if 1000 <= r.t_mid <= 1900 else TRAIN for r in ds.rows]
    assert list(w.split) == expected
    test_idx = [i for i, s in enumerate(w.split) if s == TEST]
    assert test_idx == list(range(test_idx[0], test_idx[-1] + 1))
    assert len(test_idx) == 10


def test_moments_csv_roundtrip(tmp_path):
    ds = split_random(dataset(8), 0.25, 1)
    write_moments_csv(tmp_path / "m.csv", ds)
    back = read_moments_csv(tmp_path / "m.csv")
    assert back.split == ds.split
    assert [(r.cluster_id, r.mean_x, r.exc_x, r.t_mid) for r in back.rows] == \
           [(r.cluster_id, r.mean_x, r.exc_x, r.t_mid) for r in ds.rows]
    header = (tmp_path / "m.csv").read_text().splitlines()[0]
    assert header == "cluster_id,n,mean_x,mean_y,std_x,std_y,t_mid,exc_x,exc_y,split"
