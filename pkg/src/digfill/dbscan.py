"""Density-based clustering of dig positions.

A point is core when its closed ``eps``-ball (itself included) holds at least
``min_pts`` points. Core points chained by mutual ``eps``-proximity form a
cluster; non-core points within ``eps`` of a core point join it as border
points. Everything else is noise.

Border points reachable from several clusters go to the cluster of the
qualifying core point with the smallest id, and clusters are numbered by their
smallest core id. Both rules depend only on ids, so the output does not change
when the input is permuted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .spatial_index import PointSet, build_index, query_radius

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 2.5
    min_pts: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise ConfigError(f"min_pts must be an integer >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray  # NOISE or 0..k-1, aligned with point positions
    core: np.ndarray
    k: int

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)

    @property
    def noise_count(self) -> int:
        return int(np.sum(self.labels == NOISE))


def neighbourhoods(ps: PointSet, eps: float) -> list[np.ndarray]:
    if len(ps) == 0:
        return []
    idx = build_index(ps, eps)
    return [np.fromiter(sorted(query_radius(idx, ps, p, eps)), dtype=np.int64)
            for p in ps.coords]


def dbscan(ps: PointSet, params: DbscanParams) -> Clustering:
    n = len(ps)
    nbrs = neighbourhoods(ps, params.eps)
    core = np.array([len(nb) >= params.min_pts for nb in nbrs], dtype=bool)
    labels = np.full(n, NOISE, dtype=np.int64)
    ids = ps.ids

    k = 0
    for start in np.argsort(ids, kind="stable"):
        if not core[start] or labels[start] != NOISE:
            continue
        labels[start] = k
        stack = [start]
        while stack:
            p = stack.pop()
            for q in nbrs[p]:
                if core[q] and labels[q] == NOISE:
                    labels[q] = k
                    stack.append(q)
        k += 1

    for p in np.flatnonzero(~core):
        owners = [q for q in nbrs[p] if core[q]]
        if owners:
            labels[p] = labels[min(owners, key=lambda q: ids[q])]

    return Clustering(labels, core, k)


def strip_noise(ps: PointSet, c: Clustering) -> tuple[PointSet, Clustering]:
    keep = np.flatnonzero(c.labels != NOISE)
    if len(keep) == len(ps):
        return ps, c
    # re-rank the surviving ids so they stay a permutation of 0..m-1
    new_ids = np.argsort(np.argsort(ps.ids[keep], kind="stable"), kind="stable")
    out_ps = PointSet(ps.coords[keep], new_ids)
    return out_ps, Clustering(c.labels[keep], c.core[keep], c.k)


def write_clusters_csv(path, ps: PointSet, c: Clustering) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point_id", "x", "y", "z", "label"])
        for pid, xyz, lab in zip(ps.ids, ps.coords, c.labels):
            z = repr(float(xyz[2])) if ps.dim == 3 else ""
            w.writerow([int(pid), repr(float(xyz[0])), repr(float(xyz[1])), z, int(lab)])


def read_clusters_csv(path) -> tuple[PointSet, Clustering]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    has_z = bool(rows) and rows[0]["z"] != ""
    cols = ("x", "y", "z") if has_z else ("x", "y")
    coords = np.array([[float(r[c]) for c in cols] for r in rows]).reshape(len(rows), len(cols))
    ids = np.array([int(r["point_id"]) for r in rows], dtype=np.int64)
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    k = int(labels.max()) + 1 if len(labels) else 0
    # core flags are not serialized
    return PointSet(coords, ids), Clustering(labels, np.zeros(len(rows), dtype=bool), k)
