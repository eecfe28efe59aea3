"""Gaussian dig-point simulation and the seeded synthetic bench generator."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateSplit
from .moments import ClusterMoments, write_moments_csv
from .rng import stage_seed, substream
from .telemetry import Role, TelemetryLog, TelemetryRecord


@dataclass(frozen=True)
class SimulatedCluster:
    cluster_id: int
    points: np.ndarray  # (n, 2)
    source: ClusterMoments


def simulate_cluster(m: ClusterMoments, n: int, seed: int) -> SimulatedCluster:
    """Draw ``n`` independent (x, y) points from axis-aligned normals at the
    cluster's moments. The stream is keyed by (seed, cluster_id)."""
    if n < 1:
        raise ConfigError(f"simulation count must be >= 1, got {n}")
    if m.std_x < 0 or m.std_y < 0:
        raise ConfigError("standard deviations must be non-negative")
    z = substream(seed, m.cluster_id).standard_normal((n, 2))
    pts = np.array([m.mean_x, m.mean_y]) + z * np.array([m.std_x, m.std_y])
    return SimulatedCluster(m.cluster_id, pts, m)


def simulate_all(rows, n: int, seed: int) -> list[SimulatedCluster]:
    return [simulate_cluster(m, n, seed) for m in rows]


def choose_sim_count(train) -> int:
    """Median training-cluster size; an even count takes the mean of the middle
    two, rounded half up."""
    sizes = sorted(r.n_points for r in train)
    if not sizes:
        raise ConfigError("no training clusters to size the simulation from")
    mid = len(sizes) // 2
    med = sizes[mid] if len(sizes) % 2 else (sizes[mid - 1] + sizes[mid]) / 2
    return max(1, math.floor(med + 0.5))


def write_simulated_csv(path, sims) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "x", "y"])
        for s in sims:
            for x, y in s.points:
                w.writerow([s.cluster_id, repr(float(x)), repr(float(y))])


def read_simulated_csv(path) -> dict[int, np.ndarray]:
    out: dict[int, list] = {}
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            out.setdefault(int(rec["cluster_id"]), []).append((float(rec["x"]), float(rec["y"])))
    return {k: np.array(v) for k, v in out.items()}


class PathKind(enum.Enum):
    LINE = "line"
    ARC = "arc"
    SCURVE = "scurve"


@dataclass(frozen=True)
class SynthConfig:
    n_stations: int = 12
    digs_per_station: int = 10
    station_spacing: float = 15.0
    path_kind: PathKind = PathKind.SCURVE
    dig_spread_x: float = 1.0
    dig_spread_y: float = 1.0
    excavator_offset: float = 4.0
    dump_offset: float = 12.0
    fix_interval: float = 10.0
    gps_noise: float = 0.3
    seed: int = 0
    dig_interval: float = 30.0
    travel_time: float = 120.0
    bench_z: float = 100.0
    dump_height: float = 4.0

    def __post_init__(self):
        if isinstance(self.path_kind, str):
            object.__setattr__(self, "path_kind", PathKind(self.path_kind.lower()))
        if self.n_stations < 1 or self.digs_per_station < 1:
            raise ConfigError("station and dig counts must be >= 1")
        nonneg = (self.station_spacing, self.dig_spread_x, self.dig_spread_y,
                  self.excavator_offset, self.dump_offset, self.gps_noise, self.travel_time)
        if min(nonneg) < 0:
            raise ConfigError("spacings, spreads, offsets and noise must be >= 0")
        if not (self.fix_interval > 0 and self.dig_interval > 0):
            raise ConfigError("fix_interval and dig_interval must be > 0")

    @property
    def dwell(self) -> float:
        return self.digs_per_station * self.dig_interval

    def station_start(self, i: int) -> float:
        return i * (self.dwell + self.travel_time)


def _unit_shape(kind: PathKind, u: np.ndarray) -> np.ndarray:
    if kind is PathKind.LINE:
        return np.column_stack([u, np.zeros_like(u)])
    if kind is PathKind.ARC:
        th = 0.5 * np.pi * u
        return np.column_stack([np.sin(th), 1.0 - np.cos(th)])
    # one full sine period: the heading swings by ~57 degrees and back
    return np.column_stack([u, 0.25 * np.sin(2.0 * np.pi * u)])


def path_stations(kind: PathKind, n: int, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Station centres at equal arc-length spacing, and unit left normals."""
    length = (n - 1) * spacing
    if length == 0:
        return np.zeros((n, 2)), np.tile([0.0, 1.0], (n, 1))
    u = np.linspace(0.0, 1.0, 20001)
    pts = _unit_shape(kind, u)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    pts *= length / s[-1]
    s *= length / s[-1]
    target = np.arange(n) * spacing
    centres = np.column_stack([np.interp(target, s, pts[:, 0]), np.interp(target, s, pts[:, 1])])
    # tangent from the dense polyline around each station
    h = min(0.25 * spacing, 0.5) if spacing > 0 else 0.5
    fwd = np.column_stack([np.interp(target + h, s, pts[:, 0]), np.interp(target + h, s, pts[:, 1])])
    back = np.column_stack([np.interp(target - h, s, pts[:, 0]), np.interp(target - h, s, pts[:, 1])])
    tan = fwd - back
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    normals = np.column_stack([-tan[:, 1], tan[:, 0]])
    return centres, normals


def generate_synthetic_bench(cfg: SynthConfig) -> tuple[TelemetryLog, list[ClusterMoments]]:
    """Seeded telemetry for an excavator working ``n_stations`` dig faces.

    The excavator dwells at each station for ``digs_per_station`` dig cycles,
    then drives to the next one. Dig points scatter around the station centre
    on the path. Behind the centre sit the excavator (``excavator_offset``)
    and the trucks receiving dumps (``dump_offset``). Returns the log and
    each station's true moments.
    """
    centres, normals = path_stations(cfg.path_kind, cfg.n_stations, cfg.station_spacing)
    exc_pos = centres - cfg.excavator_offset * normals
    dump_pos = centres - cfg.dump_offset * normals
    spread = np.array([cfg.dig_spread_x, cfg.dig_spread_y])
    rng_dig = np.random.default_rng(stage_seed(cfg.seed, "digs"))
    rng_dump = np.random.default_rng(stage_seed(cfg.seed, "dumps"))
    rng_gps = np.random.default_rng(stage_seed(cfg.seed, "gps"))

    records, truth = [], []
    for i in range(cfg.n_stations):
        t0 = cfg.station_start(i)
        t_dig = t0 + (np.arange(cfg.digs_per_station) + 0.5) * cfg.dig_interval
        digs = centres[i] + rng_dig.standard_normal((cfg.digs_per_station, 2)) * spread
        dumps = dump_pos[i] + rng_dump.standard_normal((cfg.digs_per_station, 2)) * spread
        for t, (x, y) in zip(t_dig, digs):
            records.append(TelemetryRecord(float(t), float(x), float(y), cfg.bench_z, Role.DIG))
        for t, (x, y) in zip(t_dig + 0.5 * cfg.dig_interval, dumps):
            records.append(TelemetryRecord(float(t), float(x), float(y),
                                           cfg.bench_z + cfg.dump_height, Role.DUMP))
        truth.append(ClusterMoments(
            i, cfg.digs_per_station, float(centres[i, 0]), float(centres[i, 1]),
            cfg.dig_spread_x, cfg.dig_spread_y,
            t0 + 0.5 * cfg.dwell, float(t_dig[0]), float(t_dig[-1]),
            float(exc_pos[i, 0]), float(exc_pos[i, 1]), cfg.bench_z,
        ))

    t_end = cfg.station_start(cfg.n_stations - 1) + cfg.dwell
    for t in np.arange(0.0, t_end + 1e-9, cfg.fix_interval):
        x, y = _excavator_at(cfg, float(t), exc_pos) + rng_gps.standard_normal(2) * cfg.gps_noise
        records.append(TelemetryRecord(float(t), float(x), float(y), 0.0, Role.EXCAVATOR, True))

    return TelemetryLog.from_records(records), truth


def _excavator_at(cfg: SynthConfig, t: float, exc_pos: np.ndarray) -> np.ndarray:
    cycle = cfg.dwell + cfg.travel_time
    i = min(int(t // cycle), cfg.n_stations - 1)
    into = t - cfg.station_start(i)
    if into <= cfg.dwell or i == cfg.n_stations - 1:
        return exc_pos[i]
    frac = (into - cfg.dwell) / cfg.travel_time
    return (1.0 - frac) * exc_pos[i] + frac * exc_pos[i + 1]


def write_ground_truth_csv(path, truth) -> None:
    write_moments_csv(path, truth)


@dataclass(frozen=True)
class RandomClusters:
    fraction: float
    seed: int
    # digs further apart in time than this start a new station; None = auto
    gap: float | None = None


@dataclass(frozen=True)
class Window:
    t0: float
    t1: float


def dig_sessions(times: np.ndarray, gap: float | None = None) -> np.ndarray:
    """Group time-sorted dig timestamps into working sessions.

    A new session starts wherever consecutive digs are more than ``gap``
    seconds apart (default: three times the median inter-dig interval).
    """
    if len(times) < 2:
        return np.zeros(len(times), dtype=np.int64)
    dt = np.diff(times)
    if gap is None:
        gap = 3.0 * float(np.median(dt))
    return np.concatenate([[0], np.cumsum(dt > gap)]).astype(np.int64)


def apply_dropout(log: TelemetryLog, mode) -> tuple[TelemetryLog, list[int]]:
    """Remove bucket-dig records; every other role is kept.

    Returns the thinned log and the positions (in ``log.records``) of the
    dropped records.
    """
    dig_pos = [i for i, r in enumerate(log.records) if r.role is Role.DIG]
    times = np.array([log.records[i].timestamp for i in dig_pos])

    if isinstance(mode, Window):
        if not mode.t0 < mode.t1:
            raise ConfigError("window start must precede its end")
        hit = (times >= mode.t0) & (times <= mode.t1)
    elif isinstance(mode, RandomClusters):
        if not 0 < mode.fraction < 1:
            raise ConfigError(f"dropout fraction must lie in (0, 1), got {mode.fraction}")
        sess = dig_sessions(times, mode.gap)
        n_sess = int(sess.max()) + 1 if len(sess) else 0
        n_drop = math.floor(mode.fraction * n_sess + 0.5)
        chosen = np.random.default_rng(mode.seed).choice(n_sess, size=n_drop, replace=False)
        hit = np.isin(sess, chosen)
    else:
        raise ConfigError(f"unknown dropout mode: {mode!r}")

    if not hit.any():
        raise DegenerateSplit("dropout removes no dig records")
    if hit.all():
        raise DegenerateSplit("dropout removes every dig record")
    dropped = [p for p, h in zip(dig_pos, hit) if h]
    gone = set(dropped)
    kept = [r for i, r in enumerate(log.records) if i not in gone]
    return TelemetryLog(tuple(kept), log.rejections), dropped
