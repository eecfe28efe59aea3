"""Mine telemetry records and CSV ingestion.

The CSV schema is ``timestamp,x,y,z,role`` with a header row. Role names
match :class:`Role` values case-insensitively. Coordinates are meters
in the local mine grid, timestamps are seconds.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, MissingFile, TooManyRejected

HEADER = ("timestamp", "x", "y", "z", "role")


class Role(enum.Enum):
    DIG = "dig"
    DUMP = "dump"
    EXCAVATOR = "excavator"

    @classmethod
    def parse(cls, text: str) -> "Role":
        return cls(text.strip().lower())


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: float
    x: float
    y: float
    z: float
    role: Role
    # excavator rows may omit z; it then parses as 0 and carries this flag
    z_unused: bool = False

    def __post_init__(self):
        vals = (self.timestamp, self.x, self.y, self.z)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("telemetry values must be finite")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str


@dataclass(frozen=True)
class TelemetryLog:
    """Timestamp-sorted records plus the rows rejected while loading."""

    records: tuple[TelemetryRecord, ...]
    rejections: tuple[Rejection, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @classmethod
    def from_records(cls, records, rejections=()) -> "TelemetryLog":
        # sorted() is stable, so equal timestamps keep their input order
        ordered = sorted(records, key=lambda r: r.timestamp)
        return cls(tuple(ordered), tuple(rejections))

    def count(self, role: Role) -> int:
        return sum(1 for r in self.records if r.role is role)

    def coords(self, role: Role, dims: int = 3) -> np.ndarray:
        recs = select_role(self, role)
        out = np.array([(r.x, r.y, r.z)[:dims] for r in recs], dtype=float)
        return out.reshape(len(recs), dims)

    def times(self, role: Role) -> np.ndarray:
        return np.array([r.timestamp for r in select_role(self, role)], dtype=float)

    def require_pipeline_ready(self) -> None:
        if self.count(Role.DIG) == 0:
            raise DataError("telemetry log has no bucket dig records")
        if self.count(Role.EXCAVATOR) == 0:
            raise DataError("telemetry log has no excavator records")


def select_role(log: TelemetryLog, role: Role) -> list[TelemetryRecord]:
    return [r for r in log.records if r.role is role]


def _parse_float(text: str, name: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ValueError(f"non-numeric {name}: {text!r}") from None
    if not math.isfinite(val):
        raise ValueError(f"non-finite {name}: {text!r}")
    return val


def _parse_row(row: list[str], synthetic_time: float | None) -> TelemetryRecord:
    if len(row) != len(HEADER):
        raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
    ts_text, x_text, y_text, z_text, role_text = (c.strip() for c in row)
    try:
        role = Role.parse(role_text)
    except ValueError:
        raise ValueError(f"unknown role: {role_text!r}") from None

    if synthetic_time is not None:
        ts = synthetic_time
    elif not ts_text:
        raise ValueError("missing timestamp")
    else:
        ts = _parse_float(ts_text, "timestamp")
        if ts < 0:
            raise ValueError(f"negative timestamp: {ts_text!r}")

    x = _parse_float(x_text, "x")
    y = _parse_float(y_text, "y")
    z_unused = False
    if z_text:
        z = _parse_float(z_text, "z")
    elif role is Role.EXCAVATOR:
        z, z_unused = 0.0, True
    else:
        raise ValueError(f"missing z for {role.value} row")
    return TelemetryRecord(ts, x, y, z, role, z_unused)


def load_csv(path, max_reject_fraction: float = 0.10) -> TelemetryLog:
    """Read and validate a telemetry CSV.

    Malformed rows are collected in ``log.rejections`` with their 1-based file
    line number. Raises ``TooManyRejected`` when the rejected share of data
    rows exceeds ``max_reject_fraction``.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such telemetry file: {path}")

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise DataError(f"{path}: header must be {','.join(HEADER)}, got {header}")
        rows = [(reader.line_num, row) for row in reader if any(c.strip() for c in row)]

    # timestamp column entirely empty -> row index stands in for time
    synthetic = bool(rows) and all(len(r) >= 1 and not r[0].strip() for _, r in rows)

    records, rejections = [], []
    for idx, (line, row) in enumerate(rows):
        try:
            records.append(_parse_row(row, float(idx) if synthetic else None))
        except ValueError as exc:
            rejections.append(Rejection(line, str(exc)))

    if rows and len(rejections) / len(rows) > max_reject_fraction:
        raise TooManyRejected(
            f"{path}: {len(rejections)} of {len(rows)} rows rejected "
            f"(limit {max_reject_fraction:.0%}); first: line {rejections[0].line}: "
            f"{rejections[0].reason}"
        )
    return TelemetryLog.from_records(records, rejections)


def write_csv(log: TelemetryLog, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in log.records:
            z = "" if r.z_unused else repr(r.z)
            w.writerow([repr(r.timestamp), repr(r.x), repr(r.y), z, r.role.value])


def rejection_report(log: TelemetryLog) -> str:
    return json.dumps([{"line": r.line, "reason": r.reason} for r in log.rejections], indent=2)
