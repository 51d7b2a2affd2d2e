"""Smart meter CSV ingest, chronological splits, and synthetic data."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import csv
import numpy as np

PERIODS_PER_DAY = 48
_CADENCE = timedelta(minutes=30)
_MAX_LISTED = 20

__all__ = [
    "PERIODS_PER_DAY",
    "IngestError",
    "SmartMeterTable",
    "ingest_csv",
    "write_table_csv",
    "split_indices",
    "rescale_reference",
    "synthetic_table",
    "synthetic_reference",
]


class IngestError(ValueError):
    """Itemized problems found while reading a smart meter file."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        shown = self.problems[:_MAX_LISTED]
        if len(self.problems) > _MAX_LISTED:
            shown.append(f"... and {len(self.problems) - _MAX_LISTED} more")
        super().__init__("; ".join(shown))


@dataclass(frozen=True)
class SmartMeterTable:
    """Aligned half-hourly loads: one row of `loads` per consumer id."""

    ids: tuple[str, ...]
    timestamps: tuple[datetime, ...]
    loads: np.ndarray

    @property
    def n_consumers(self) -> int:
        return len(self.ids)

    @property
    def n_periods(self) -> int:
        return len(self.timestamps)

    def window(self, sl: slice) -> "SmartMeterTable":
        return SmartMeterTable(self.ids, self.timestamps[sl], self.loads[:, sl])

    def series(self, consumer_id: str) -> np.ndarray:
        return self.loads[self.ids.index(consumer_id)]


def _parse_stamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def ingest_csv(path: str | Path) -> SmartMeterTable:
    """Read and validate an id,timestamp,kwh file.

    All consumers must cover one common half-hourly grid with no gaps and
    no duplicate readings; every violation is collected and reported in a
    single IngestError rather than failing on the first.
    """
    problems: list[str] = []
    readings: dict[str, dict[datetime, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(["no rows"])
        if [h.strip().lower() for h in header] != ["id", "timestamp", "kwh"]:
            raise IngestError([f"expected header id,timestamp,kwh, got {','.join(header)!r}"])
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                problems.append(f"line {lineno}: expected 3 fields, got {len(row)}")
                continue
            cid = row[0].strip()
            try:
                stamp = _parse_stamp(row[1])
            except ValueError:
                problems.append(f"line {lineno}: unparseable timestamp {row[1].strip()!r}")
                continue
            try:
                kwh = float(row[2])
            except ValueError:
                problems.append(f"line {lineno}: unparseable kwh {row[2].strip()!r}")
                continue
            if not np.isfinite(kwh) or kwh < 0.0:
                problems.append(f"line {lineno}: kwh must be finite and nonnegative, got {row[2].strip()}")
                continue
            per = readings.setdefault(cid, {})
            if stamp in per:
                problems.append(f"duplicate reading for id {cid} at {stamp}")
                continue
            per[stamp] = kwh

    if not readings and not problems:
        raise IngestError(["no rows"])
    stamps = sorted({s for per in readings.values() for s in per})
    for prev, cur in zip(stamps, stamps[1:]):
        if cur - prev != _CADENCE:
            problems.append(f"cadence gap between {prev} and {cur}")
    for cid in sorted(readings):
        missing = [s for s in stamps if s not in readings[cid]]
        problems.extend(f"id {cid} missing reading at {s}" for s in missing[:_MAX_LISTED])
    if problems:
        raise IngestError(problems)

    ids = tuple(sorted(readings))
    loads = np.array([[readings[cid][s] for s in stamps] for cid in ids])
    return SmartMeterTable(ids, tuple(stamps), loads)


def write_table_csv(table: SmartMeterTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "timestamp", "kwh"])
        for i, cid in enumerate(table.ids):
            for j, stamp in enumerate(table.timestamps):
                writer.writerow([cid, stamp.strftime("%Y-%m-%d %H:%M"), repr(float(table.loads[i, j]))])


def split_indices(n_periods: int, fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> tuple[slice, slice, slice]:
    """Chronological train/validation/test boundaries, never overlapping."""
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f <= 0.0 for f in fractions):
        raise ValueError("fractions must be positive and sum to 1")
    n_train = int(n_periods * fractions[0])
    n_val = int(n_periods * fractions[1])
    if n_train == 0 or n_val == 0 or n_train + n_val >= n_periods:
        raise ValueError(f"{n_periods} periods cannot support a {fractions} split")
    return slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, n_periods)


def rescale_reference(reference: np.ndarray, target: np.ndarray, window: slice | None = None) -> np.ndarray:
    """Scale the reference series so its energy matches the target's.

    The scale is the ratio of sums over `window` (the training window in
    the experiments; everything when omitted) applied to the whole series.
    """
    ref = np.asarray(reference, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if window is None:
        window = slice(None)
    denom = ref[window].sum()
    if denom == 0.0:
        raise ValueError("reference series sums to zero over the scaling window")
    return ref * (tgt[window].sum() / denom)


def synthetic_table(
    n_consumers: int = 8,
    n_days: int = 28,
    seed: int = 0,
    start: str = "2024-01-06",
) -> SmartMeterTable:
    """Generate heterogeneous half-hourly household profiles.

    Each consumer has a morning bump and a dominant evening peak, both
    shifted and scaled per household, plus a mild weekly swing and
    idiosyncratic noise, floored just above zero.
    """
    if n_consumers < 1 or n_days < 1:
        raise ValueError("need at least one consumer and one day")
    rng = np.random.default_rng(seed)
    n = n_days * PERIODS_PER_DAY
    t = np.arange(n)
    hour = (t % PERIODS_PER_DAY) / 2.0
    week = 2.0 * np.pi * t / (7 * PERIODS_PER_DAY)
    scale = rng.uniform(0.4, 1.2, n_consumers)
    shift = rng.uniform(-1.5, 1.5, n_consumers)
    evening = rng.uniform(0.35, 0.75, n_consumers)
    morning = rng.uniform(0.10, 0.30, n_consumers)
    noise_level = rng.uniform(0.05, 0.15, n_consumers)
    loads = np.empty((n_consumers, n))
    for i in range(n_consumers):
        shape = (
            0.30
            + morning[i] * np.exp(-0.5 * ((hour - 7.5 - shift[i]) / 2.0) ** 2)
            + evening[i] * np.exp(-0.5 * ((hour - 19.0 - shift[i]) / 2.5) ** 2)
        ) * (1.0 + 0.04 * np.sin(week))
        series = scale[i] * shape + noise_level[i] * scale[i] * rng.standard_normal(n)
        loads[i] = np.maximum(series, 0.01)
    first = datetime.fromisoformat(start)
    stamps = tuple(first + k * _CADENCE for k in range(n))
    ids = tuple(f"c{i + 1:02d}" for i in range(n_consumers))
    return SmartMeterTable(ids, stamps, loads)


def synthetic_reference(table: SmartMeterTable, seed: int = 1) -> np.ndarray:
    """A system-level stand-in for the households: a broad daytime plateau
    with a slow seasonal drift. It rises and falls with the aggregate but
    its distribution of values is a different shape, so it is informative
    about level yet a poor substitute for the metered detail."""
    rng = np.random.default_rng(seed)
    n = table.n_periods
    t = np.arange(n)
    hour = (t % PERIODS_PER_DAY) / 2.0
    plateau = 0.5 * (np.tanh((hour - 7.5) / 1.5) - np.tanh((hour - 21.5) / 1.5))
    drift = 1.0 + 0.10 * np.sin(2.0 * np.pi * t / max(n, 1) + 0.7)
    series = (0.6 + 0.7 * plateau) * drift + 0.03 * rng.standard_normal(n)
    return np.maximum(series, 0.01)
