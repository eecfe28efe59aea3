"""Uniform-grid index for exact fixed-radius neighbour queries."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonPositiveCellSize, NonPositiveRadius


@dataclass(frozen=True)
class PointSet:
    """Points in 2-D or 3-D.

    ``ids`` default to the positional indices 0..n-1. They may be supplied in
    any order (a permuted copy of another set); algorithms that need a
    canonical order break ties on ids, never on position.
    """

    coords: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1 and coords.size == 0:
            coords = coords.reshape(0, 2)
        if coords.ndim != 2 or coords.shape[1] not in (2, 3):
            raise ConfigError(f"points must be an (n, 2) or (n, 3) array, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ConfigError("point coordinates must be finite")
        n = len(coords)
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != (n,) or not np.array_equal(np.sort(ids), np.arange(n)):
            raise ConfigError("ids must be a permutation of 0..n-1")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class GridIndex:
    cell_size: float
    buckets: dict[tuple[int, ...], np.ndarray]
    dim: int


def _cell_of(coords: np.ndarray, cell_size: float) -> np.ndarray:
    return np.floor(coords / cell_size).astype(np.int64)


def build_index(ps: PointSet, cell_size: float) -> GridIndex:
    if not cell_size > 0:
        raise NonPositiveCellSize(f"cell_size must be > 0, got {cell_size}")
    buckets: dict[tuple[int, ...], list[int]] = {}
    cells = _cell_of(ps.coords, cell_size)
    for pos, cell in enumerate(map(tuple, cells)):
        buckets.setdefault(cell, []).append(pos)
    return GridIndex(
        float(cell_size),
        {k: np.array(v, dtype=np.int64) for k, v in buckets.items()},
        ps.dim,
    )


def query_radius(idx: GridIndex, ps: PointSet, center, r: float) -> set[int]:
    """Positions of all points within Euclidean distance ``r`` of ``center``
    (closed ball, so a point always finds itself)."""
    if not r > 0:
        raise NonPositiveRadius(f"radius must be > 0, got {r}")
    center = np.asarray(center, dtype=float)
    if center.shape != (idx.dim,):
        raise ConfigError(f"query center must have dimension {idx.dim}")
    cands = _candidates(idx, center, r)
    if cands.size == 0:
        return set()
    d2 = np.sum((ps.coords[cands] - center) ** 2, axis=1)
    return set(cands[d2 <= r * r].tolist())


def _candidates(idx: GridIndex, center: np.ndarray, r: float) -> np.ndarray:
    # reach = 1 when r <= cell_size, i.e. the 3^dim block around the centre cell
    reach = max(1, math.ceil(r / idx.cell_size))
    base = _cell_of(center, idx.cell_size)
    found = []
    if (2 * reach + 1) ** idx.dim > len(idx.buckets):
        # fewer occupied cells than cells in the block: walk the buckets instead
        for cell, hit in idx.buckets.items():
            if max(abs(c - b) for c, b in zip(cell, base.tolist())) <= reach:
                found.append(hit)
    else:
        for off in itertools.product(range(-reach, reach + 1), repeat=idx.dim):
            hit = idx.buckets.get(tuple((base + off).tolist()))
            if hit is not None:
                found.append(hit)
    if not found:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(found)
