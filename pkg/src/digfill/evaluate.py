"""Scoring inferred moments and simulated dig points against the truth."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .dbscan import Clustering, DbscanParams, dbscan
from .errors import ConfigError, IdMismatch, TooFewPoints
from .spatial_index import PointSet


@dataclass(frozen=True)
class ClusterError:
    cluster_id: int
    mean_err: float
    std_err_x: float
    std_err_y: float
    gap_dist: float = math.nan


def moment_errors(predicted, truth) -> list[ClusterError]:
    pred = {r.cluster_id: r for r in predicted}
    true = {r.cluster_id: r for r in truth}
    if pred.keys() != true.keys():
        raise IdMismatch(f"cluster ids differ: predicted {sorted(pred)} vs truth {sorted(true)}")
    out = []
    for cid in sorted(pred):
        p, t = pred[cid], true[cid]
        out.append(ClusterError(
            cid,
            math.hypot(p.mean_x - t.mean_x, p.mean_y - t.mean_y),
            abs(p.std_x - t.std_x),
            abs(p.std_y - t.std_y),
        ))
    return out


def gap_distances(test_rows, train_rows) -> dict[int, float]:
    """Distance from each test cluster's excavator feature to the nearest
    training cluster's feature."""
    tr = np.array([(r.exc_x, r.exc_y) for r in train_rows], dtype=float).reshape(-1, 2)
    if len(tr) == 0:
        raise ConfigError("gap distance needs at least one training cluster")
    return {
        r.cluster_id: float(np.min(np.hypot(tr[:, 0] - r.exc_x, tr[:, 1] - r.exc_y)))
        for r in test_rows
    }


def spearman(a, b) -> float:
    """Rank correlation with midranks for ties; 0 when either side is constant."""
    ra = rankdata(np.asarray(a, dtype=float))
    rb = rankdata(np.asarray(b, dtype=float))
    ra -= ra.mean()
    rb -= rb.mean()
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if den == 0:
        return 0.0
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))


def gap_trend(errors: list[ClusterError]) -> float:
    if len(errors) < 4:
        raise TooFewPoints(f"gap trend needs >= 4 test clusters, got {len(errors)}")
    return spearman([e.gap_dist for e in errors], [e.mean_err for e in errors])


@dataclass(frozen=True)
class Recovery:
    recovery_rate: float
    centroid_rmse: float | None
    n_recovered: int
    pairs: tuple[tuple[int, int, float], ...] = ()  # (recovered idx, true cluster id, distance)


def _centroids(xy: np.ndarray, labels: np.ndarray, ids) -> np.ndarray:
    return np.array([xy[labels == c].mean(axis=0) for c in ids]).reshape(len(ids), 2)


def greedy_match(rec: np.ndarray, true: np.ndarray, threshold: float) -> list[tuple[int, int, float]]:
    """Pair centroids in ascending distance order, each used at most once,
    stopping at ``threshold``."""
    if len(rec) == 0 or len(true) == 0:
        return []
    d = np.hypot(rec[:, None, 0] - true[None, :, 0], rec[:, None, 1] - true[None, :, 1])
    order = np.argsort(d, axis=None, kind="stable")
    used_r, used_t, pairs = set(), set(), []
    for flat in order:
        i, j = np.unravel_index(flat, d.shape)
        if d[i, j] > threshold:
            break
        if i in used_r or j in used_t:
            continue
        used_r.add(i)
        used_t.add(j)
        pairs.append((int(i), int(j), float(d[i, j])))
    return pairs


def cluster_recovery(simulated, truth_points: PointSet, truth_clustering: Clustering,
                     params: DbscanParams, dropped=None,
                     threshold_factor: float = 2.0) -> Recovery:
    """Re-cluster the pooled simulated points in x/y and match them to the
    dropped true clusters.

    ``dropped`` lists the true cluster ids that were held out (default: every
    cluster in ``truth_clustering``). A dropped cluster counts as recovered
    when a simulated cluster's centroid lands within ``threshold_factor * eps``
    of its centroid.
    """
    sims = list(simulated)
    if not sims:
        raise ConfigError("cluster recovery needs at least one simulated cluster")
    pooled = np.vstack([s.points for s in sims])
    rc = dbscan(PointSet(pooled), params)
    rec_cent = _centroids(pooled, rc.labels, range(rc.k))

    dropped = list(range(truth_clustering.k)) if dropped is None else sorted(dropped)
    if not dropped:
        raise ConfigError("no dropped clusters to recover")
    xy = truth_points.coords[:, :2]
    true_cent = _centroids(xy, truth_clustering.labels, dropped)

    pairs = greedy_match(rec_cent, true_cent, threshold_factor * params.eps)
    rmse = math.sqrt(sum(p[2] ** 2 for p in pairs) / len(pairs)) if pairs else None
    return Recovery(
        len(pairs) / len(dropped), rmse, rc.k,
        tuple((i, dropped[j], dist) for i, j, dist in pairs),
    )


@dataclass
class EvalReport:
    scenario: str
    per_cluster: list[ClusterError]
    rmse_mean: float
    mean_abs_std_err: float
    recovery_rate: float
    centroid_rmse: float | None
    trend_rho: float | None
    n_train: int = 0
    n_test: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "summary": {
                "rmse_mean": self.rmse_mean,
                "mean_abs_std_err": self.mean_abs_std_err,
                "recovery_rate": self.recovery_rate,
                "centroid_rmse": self.centroid_rmse,
                "trend_rho": self.trend_rho,
                "n_train": self.n_train,
                "n_test": self.n_test,
            },
            "per_cluster": [asdict(e) for e in self.per_cluster],
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        s = d["summary"]
        return cls(
            d["scenario"],
            [ClusterError(**e) for e in d["per_cluster"]],
            s["rmse_mean"], s["mean_abs_std_err"], s["recovery_rate"],
            s["centroid_rmse"], s["trend_rho"], s["n_train"], s["n_test"],
            d.get("extra", {}),
        )


def build_report(scenario: str, predicted, truth, train_rows, recovery: Recovery,
                 extra: dict | None = None) -> EvalReport:
    """Assemble per-cluster errors (with gap distances) and the summary.

    ``trend_rho`` stays ``None`` when fewer than four test clusters exist.
    """
    errs = moment_errors(predicted, truth)
    if not errs:
        raise ConfigError("cannot build a report for an empty test set")
    gaps = gap_distances(predicted, train_rows)
    errs = [ClusterError(e.cluster_id, e.mean_err, e.std_err_x, e.std_err_y, gaps[e.cluster_id])
            for e in errs]
    mean_err = np.array([e.mean_err for e in errs])
    std_err = np.array([[e.std_err_x, e.std_err_y] for e in errs])
    rho = gap_trend(errs) if len(errs) >= 4 else None
    return EvalReport(
        scenario, errs,
        float(np.sqrt(np.mean(mean_err**2))),
        float(np.mean(std_err)),
        recovery.recovery_rate, recovery.centroid_rmse, rho,
        len(list(train_rows)), len(errs), dict(extra or {}),
    )


def write_per_cluster_csv(path, report: EvalReport) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "mean_err", "std_err_x", "std_err_y", "gap_dist"])
        for e in report.per_cluster:
            w.writerow([e.cluster_id, repr(e.mean_err), repr(e.std_err_x),
                        repr(e.std_err_y), repr(e.gap_dist)])
