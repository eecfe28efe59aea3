"""Per-cluster moments with their excavator association, plus train/test splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dbscan import Clustering
from .errors import ClusterTooSmall, ConfigError, DegenerateSplit, NoExcavatorData
from .spatial_index import PointSet
from .telemetry import Role, TelemetryLog, select_role

TRAIN = "train"
TEST = "test"

CSV_FIELDS = ("cluster_id", "n", "mean_x", "mean_y", "std_x", "std_y",
              "t_mid", "exc_x", "exc_y", "split")


@dataclass(frozen=True)
class ClusterMoments:
    cluster_id: int
    n_points: int
    mean_x: float
    mean_y: float
    std_x: float
    std_y: float
    t_mid: float
    t_start: float = math.nan
    t_end: float = math.nan
    exc_x: float = math.nan
    exc_y: float = math.nan
    mean_z: float = math.nan  # reporting only


@dataclass(frozen=True)
class MomentDataset:
    rows: tuple[ClusterMoments, ...]
    split: tuple[str, ...]

    @classmethod
    def all_train(cls, rows) -> "MomentDataset":
        rows = tuple(rows)
        return cls(rows, (TRAIN,) * len(rows))

    def _pick(self, tag):
        return [r for r, s in zip(self.rows, self.split) if s == tag]

    def train(self) -> list[ClusterMoments]:
        return self._pick(TRAIN)

    def test(self) -> list[ClusterMoments]:
        return self._pick(TEST)


def compute_moments(ps: PointSet, c: Clustering, times=None) -> list[ClusterMoments]:
    """Mean and sample standard deviation (n-1) of x and y per cluster.

    ``times`` holds one timestamp per point; without it the time fields are NaN.
    Noise points are ignored.
    """
    xyz = ps.coords
    out = []
    for cid in range(c.k):
        mem = c.members(cid)
        n = len(mem)
        if n < 2:
            raise ClusterTooSmall(f"cluster {cid} has {n} point(s); need >= 2 for a sample std")
        pts = xyz[mem]
        lo, hi = pts[:, :2].min(axis=0), pts[:, :2].max(axis=0)
        # clip guards the bounding-box property against last-ulp rounding
        mean = np.clip(pts[:, :2].mean(axis=0), lo, hi)
        std = pts[:, :2].std(axis=0, ddof=1)
        if times is not None:
            t = np.asarray(times, dtype=float)[mem]
            t_mid, t_start, t_end = float(np.median(t)), float(t.min()), float(t.max())
        else:
            t_mid = t_start = t_end = math.nan
        mean_z = float(pts[:, 2].mean()) if ps.dim == 3 else math.nan
        out.append(ClusterMoments(
            cid, n, float(mean[0]), float(mean[1]), float(std[0]), float(std[1]),
            t_mid, t_start, t_end, mean_z=mean_z,
        ))
    return out


def _excavator_arrays(log: TelemetryLog) -> tuple[np.ndarray, np.ndarray]:
    fixes = select_role(log, Role.EXCAVATOR)
    if not fixes:
        raise NoExcavatorData("telemetry log has no excavator fixes")
    t = np.array([f.timestamp for f in fixes])
    xy = np.array([(f.x, f.y) for f in fixes])
    return t, xy


def _associate(m: ClusterMoments, t: np.ndarray, xy: np.ndarray) -> ClusterMoments:
    inside = (t >= m.t_start) & (t <= m.t_end)
    if inside.any():
        ex, ey = np.median(xy[inside], axis=0)
    else:
        # argmin picks the earliest fix on ties
        ex, ey = xy[np.argmin(np.abs(t - m.t_mid))]
    return replace(m, exc_x=float(ex), exc_y=float(ey))


def associate_excavator(m: ClusterMoments, log: TelemetryLog) -> ClusterMoments:
    """Attach the excavator position to a cluster.

    Uses the component-wise median of excavator fixes inside the cluster's
    member time span, or the fix nearest in time to ``t_mid`` when the span
    holds none.
    """
    return _associate(m, *_excavator_arrays(log))


def associate_all(rows, log: TelemetryLog) -> list[ClusterMoments]:
    t, xy = _excavator_arrays(log)
    return [_associate(m, t, xy) for m in rows]


def _checked(ds: MomentDataset, split: list[str]) -> MomentDataset:
    n_test = split.count(TEST)
    if n_test == 0:
        raise DegenerateSplit("split leaves no test clusters")
    if n_test == len(split):
        raise DegenerateSplit("split leaves no training clusters")
    return MomentDataset(ds.rows, tuple(split))


def split_random(ds: MomentDataset, fraction: float, seed: int) -> MomentDataset:
    if not 0 < fraction < 1:
        raise ConfigError(f"test fraction must lie in (0, 1), got {fraction}")
    k = len(ds.rows)
    n_test = math.floor(fraction * k + 0.5)
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(k, size=min(n_test, k), replace=False).tolist())
    return _checked(ds, [TEST if i in chosen else TRAIN for i in range(k)])


def split_window(ds: MomentDataset, t0: float, t1: float) -> MomentDataset:
    if not t0 < t1:
        raise ConfigError(f"window start must precede its end, got [{t0}, {t1}]")
    return _checked(ds, [TEST if t0 <= r.t_mid <= t1 else TRAIN for r in ds.rows])


def write_moments_csv(path, ds) -> None:
    """Write a MomentDataset, or a plain sequence of rows with an empty split
    column (used for ground truth and predictions)."""
    if isinstance(ds, MomentDataset):
        rows, split = ds.rows, ds.split
    else:
        rows = list(ds)
        split = [""] * len(rows)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r, s in zip(rows, split):
            w.writerow([r.cluster_id, r.n_points, repr(r.mean_x), repr(r.mean_y),
                        repr(r.std_x), repr(r.std_y), repr(r.t_mid),
                        repr(r.exc_x), repr(r.exc_y), s])


def read_moments_csv(path) -> MomentDataset:
    rows, split = [], []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            t_mid = float(rec["t_mid"])
            rows.append(ClusterMoments(
                int(rec["cluster_id"]), int(rec["n"]),
                float(rec["mean_x"]), float(rec["mean_y"]),
                float(rec["std_x"]), float(rec["std_y"]),
                t_mid, t_mid, t_mid,
                float(rec["exc_x"]), float(rec["exc_y"]),
            ))
            split.append(rec.get("split") or TRAIN)
    return MomentDataset(tuple(rows), tuple(split))
