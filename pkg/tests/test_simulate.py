import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from digfill.dbscan import NOISE, DbscanParams, dbscan
from digfill.errors import ConfigError, DegenerateSplit
from digfill.moments import ClusterMoments, compute_moments
from digfill.simulate import (PathKind, RandomClusters, SynthConfig, Window, apply_dropout,
                              choose_sim_count, dig_sessions, generate_synthetic_bench,
                              path_stations, read_simulated_csv, simulate_all, simulate_cluster,
                              write_ground_truth_csv, write_simulated_csv)
from digfill.spatial_index import PointSet
from digfill.telemetry import Role, write_csv


def row(cid=0, mx=10.0, my=-5.0, sx=1.0, sy=2.0, n=10):
    return ClusterMoments(cid, n, mx, my, sx, sy, 0.0)


def test_zero_spread_collapses_to_mean():
    s = simulate_cluster(row(sx=0.0, sy=0.0), 25, seed=1)
    assert s.points.shape == (25, 2)
    assert np.all(s.points == [10.0, -5.0])


def test_rejects_bad_count_and_negative_std():
    with pytest.raises(ConfigError):
        simulate_cluster(row(), 0, seed=0)
    with pytest.raises(ConfigError):
        simulate_cluster(row(sx=-1.0), 5, seed=0)


def test_large_sample_matches_moments():
    s = simulate_cluster(row(), 10_000, seed=3)
    m = s.points.mean(axis=0)
    sd = s.points.std(axis=0, ddof=1)
    assert np.all(np.abs(m - [10.0, -5.0]) <= 0.05)
    assert abs(sd[0] - 1.0) <= 0.03 * 1.0
    assert abs(sd[1] - 2.0) <= 0.03 * 2.0


@pytest.mark.parametrize("n,tol", [(100, 0.15), (1000, 0.05), (10_000, 0.03)])
def test_sample_std_converges(n, tol):
    s = simulate_cluster(row(sx=1.5, sy=0.5), n, seed=11)
    sd = s.points.std(axis=0, ddof=1)
    assert np.all(np.abs(sd - [1.5, 0.5]) <= tol * np.array([1.5, 0.5]))


def test_determinism_and_cluster_keyed_streams():
    a = simulate_all([row(0), row(1)], 50, seed=9)
    b = simulate_all([row(1), row(0)], 50, seed=9)
    assert np.array_equal(a[0].points, b[1].points)
    assert np.array_equal(a[1].points, b[0].points)
    assert not np.array_equal(a[0].points, a[1].points)
    c = simulate_all([row(0)], 50, seed=10)
    assert not np.array_equal(a[0].points, c[0].points)


@pytest.mark.parametrize("sizes,expected", [([4, 6, 8], 6), ([12], 12), ([3, 3, 9, 9], 6),
                                            ([5, 6], 6), ([1, 1], 1)])
def test_choose_sim_count(sizes, expected):
    assert choose_sim_count([row(i, n=s) for i, s in enumerate(sizes)]) == expected


def test_choose_sim_count_empty():
    with pytest.raises(ConfigError):
        choose_sim_count([])


def test_simulated_csv_round_trip(tmp_path):
    sims = simulate_all([row(3), row(7)], 20, seed=2)
    write_simulated_csv(tmp_path / "s.csv", sims)
    back = read_simulated_csv(tmp_path / "s.csv")
    assert sorted(back) == [3, 7]
    for s in sims:
        assert np.array_equal(back[s.cluster_id], s.points)


@pytest.mark.parametrize("kind", list(PathKind))
def test_path_stations_equal_arc_spacing(kind):
    c, nrm = path_stations(kind, 12, 15.0)
    assert c.shape == (12, 2)
    assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0)
    # chord never exceeds the arc; on the straight line they coincide
    chords = np.hypot(*np.diff(c, axis=0).T)
    assert np.all(chords <= 15.0 + 1e-6)
    assert np.all(chords >= 13.5)
    if kind is PathKind.LINE:
        assert np.allclose(chords, 15.0)


def test_bench_shape():
    cfg = SynthConfig()
    tlog, truth = generate_synthetic_bench(cfg)
    assert tlog.count(Role.DIG) == 120
    assert tlog.count(Role.DUMP) == 120
    assert len(truth) == 12
    exc = tlog.coords(Role.EXCAVATOR, 2)
    n_fix = math.floor((cfg.station_start(11) + cfg.dwell) / cfg.fix_interval) + 1
    assert len(exc) == n_fix
    assert all(r.z_unused for r in tlog.records if r.role is Role.EXCAVATOR)
    ts = [r.timestamp for r in tlog.records]
    assert ts == sorted(ts)


def test_degenerate_bench_gives_one_cluster_per_station():
    cfg = SynthConfig(dig_spread_x=0.0, dig_spread_y=0.0, gps_noise=0.0)
    tlog, _ = generate_synthetic_bench(cfg)
    c = dbscan(PointSet(tlog.coords(Role.DIG, 3)),
               DbscanParams(cfg.station_spacing / 4, 2))
    assert c.k == cfg.n_stations
    assert not np.any(c.labels == NOISE)


def test_bench_moments_near_truth():
    cfg = SynthConfig(seed=5)
    tlog, truth = generate_synthetic_bench(cfg)
    ps = PointSet(tlog.coords(Role.DIG, 3))
    c = dbscan(ps, DbscanParams())
    assert c.k == cfg.n_stations
    est = compute_moments(ps, c, tlog.times(Role.DIG))
    tol = 3 * cfg.dig_spread_x / math.sqrt(cfg.digs_per_station)
    for e in est:
        t = min(truth, key=lambda r: math.hypot(r.mean_x - e.mean_x, r.mean_y - e.mean_y))
        assert math.hypot(e.mean_x - t.mean_x, e.mean_y - t.mean_y) <= tol * math.sqrt(2)


def test_bench_is_deterministic(tmp_path):
    for d in ("a", "b"):
        tlog, truth = generate_synthetic_bench(SynthConfig(seed=4))
        (tmp_path / d).mkdir()
        write_csv(tlog, tmp_path / d / "t.csv")
        write_ground_truth_csv(tmp_path / d / "g.csv", truth)
    for f in ("t.csv", "g.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(n_stations=0)
    with pytest.raises(ConfigError):
        SynthConfig(gps_noise=-1.0)
    assert SynthConfig(path_kind="LINE").path_kind is PathKind.LINE


def test_dig_sessions():
    t = np.array([0, 30, 60, 500, 530, 560, 1200.0])
    assert dig_sessions(t).tolist() == [0, 0, 0, 1, 1, 1, 2]
    assert dig_sessions(t, gap=1000).tolist() == [0] * 7


def test_window_dropout_without_hits():
    tlog, _ = generate_synthetic_bench(SynthConfig())
    with pytest.raises(DegenerateSplit):
        apply_dropout(tlog, Window(1e9, 2e9))
    with pytest.raises(DegenerateSplit):
        apply_dropout(tlog, Window(-1.0, 1e9))
    with pytest.raises(ConfigError):
        apply_dropout(tlog, Window(5.0, 1.0))


def test_random_dropout_removes_whole_stations():
    cfg = SynthConfig()
    tlog, _ = generate_synthetic_bench(cfg)
    thinned, dropped = apply_dropout(tlog, RandomClusters(0.25, seed=1))
    assert len(dropped) == 3 * cfg.digs_per_station
    assert thinned.count(Role.DIG) == 120 - len(dropped)
    assert thinned.count(Role.EXCAVATOR) == tlog.count(Role.EXCAVATOR)
    assert thinned.count(Role.DUMP) == tlog.count(Role.DUMP)
    stations = {int(tlog.records[p].timestamp // (cfg.dwell + cfg.travel_time)) for p in dropped}
    assert len(stations) == 3
    kept = set(thinned.records)
    removed = [r for r in tlog.records if r not in kept]
    assert sorted(tlog.records.index(r) for r in removed) == dropped


@settings(max_examples=30)
@given(t0=st.floats(0, 8000), width=st.floats(1, 4000))
def test_window_dropout_is_a_set_difference(t0, width):
    tlog, _ = generate_synthetic_bench(SynthConfig(n_stations=4))
    try:
        thinned, dropped = apply_dropout(tlog, Window(t0, t0 + width))
    except DegenerateSplit:
        return
    for p in dropped:
        r = tlog.records[p]
        assert r.role is Role.DIG and t0 <= r.timestamp <= t0 + width
    assert len(thinned.records) + len(dropped) == len(tlog.records)
    assert all(r.role is not Role.DIG or not (t0 <= r.timestamp <= t0 + width)
               for r in thinned.records)
