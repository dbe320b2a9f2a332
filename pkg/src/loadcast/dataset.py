"""CSV ingestion, the on-disk series store, and synthetic load data.

The interchange format is CSV with header ``series_id,timestamp,load_mw``:
ISO-8601 hourly timestamps, one row per hour per series, a blank load
field marking a missing hour.  Rows may arrive shuffled; ingestion sorts
them, enforces strict hourly enumeration per series, and rejects
duplicates.  The store file is a binary snapshot of the same content
with a manifest of coverage and gap statistics.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError, ModelFileError
from .preprocess import HourlySeries

STORE_MAGIC = b"loadcast-store\n"
STORE_VERSION = 1

CSV_HEADER = ["series_id", "timestamp", "load_mw"]

_HOUR = dt.timedelta(hours=1)


@dataclass
class DatasetStore:
    series: dict = field(default_factory=dict)

    @property
    def series_ids(self) -> list:
        return sorted(self.series)

    def __len__(self) -> int:
        return len(self.series)

    def get(self, series_id: str) -> HourlySeries:
        try:
            return self.series[series_id]
        except KeyError:
            raise IngestError(f"store has no series {series_id!r}") from None

    def manifest(self) -> dict:
        per_series = {}
        for sid in self.series_ids:
            s = self.series[sid]
            missing = int(np.sum(s.missing))
            starts = np.flatnonzero(s.missing[1:] & ~s.missing[:-1]).size
            gap_count = starts + int(bool(s.missing[0]))
            per_series[sid] = {
                "start": s.start.isoformat(),
                "end": s.end.isoformat(),
                "hours": len(s),
                "missing_hours": missing,
                "coverage_pct": 100.0 * (len(s) - missing) / len(s),
                "gap_count": gap_count,
            }
        return {
            "total_series": len(self.series),
            "total_hours": sum(len(s) for s in self.series.values()),
            "series": per_series,
        }


def _parse_timestamp(raw: str, line: int) -> dt.datetime:
    try:
        ts = dt.datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    except ValueError:
        raise IngestError(f"line {line}: bad timestamp {raw!r}") from None
    if ts.tzinfo is not None:
        ts = ts.astimezone(dt.timezone.utc).replace(tzinfo=None)
    if ts.minute or ts.second or ts.microsecond:
        raise IngestError(f"line {line}: timestamp {raw!r} is not a whole hour")
    return ts


def _parse_load(raw: str, line: int):
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise IngestError(f"line {line}: bad load value {raw!r}") from None
    if not np.isfinite(value) or value <= 0.0:
        raise IngestError(
            f"line {line}: load must be finite and positive, got {raw!r}")
    return value


def ingest_csv(path) -> DatasetStore:
    rows_by_series: dict = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise IngestError(
                f"expected header {','.join(CSV_HEADER)!r}, got {header!r}")
        for line, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != 3:
                raise IngestError(f"line {line}: expected 3 fields, got {len(row)}")
            sid = row[0].strip()
            if not sid:
                raise IngestError(f"line {line}: empty series_id")
            ts = _parse_timestamp(row[1], line)
            load = _parse_load(row[2], line)
            rows_by_series.setdefault(sid, []).append((ts, load))
    if not rows_by_series:
        raise IngestError("no data rows")

    store = DatasetStore()
    for sid in sorted(rows_by_series):
        rows = sorted(rows_by_series[sid], key=lambda r: r[0])
        for (t_prev, _), (t_cur, _) in zip(rows, rows[1:]):
            if t_cur == t_prev:
                raise IngestError(f"{sid}: duplicate timestamp {t_cur.isoformat()}")
            if t_cur - t_prev != _HOUR:
                raise IngestError(
                    f"{sid}: non-hourly step from {t_prev.isoformat()} "
                    f"to {t_cur.isoformat()}")
        values = np.array([np.nan if load is None else load
                           for _, load in rows])
        missing = np.array([load is None for _, load in rows])
        store.series[sid] = HourlySeries(sid, rows[0][0], values, missing)
    return store


def export_csv(store: DatasetStore, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for sid in store.series_ids:
            s = store.series[sid]
            for i in range(len(s)):
                load = "" if s.missing[i] else repr(float(s.values[i]))
                writer.writerow([sid, s.timestamp(i).isoformat(), load])


def save_store(path, store: DatasetStore):
    header = {
        "format_version": STORE_VERSION,
        "series": [{"id": sid,
                    "start": store.series[sid].start.isoformat(),
                    "hours": len(store.series[sid])}
                   for sid in store.series_ids],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(blob.encode("utf-8"))
        fh.write(b"\n")
        for sid in store.series_ids:
            s = store.series[sid]
            fh.write(np.ascontiguousarray(s.values, dtype=np.float64).tobytes())
            fh.write(np.ascontiguousarray(s.missing, dtype=np.uint8).tobytes())


def load_store(path) -> DatasetStore:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != STORE_MAGIC:
            raise ModelFileError("not a store file (bad magic)")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFileError(f"unreadable store header: {exc}") from None
        payload = fh.read()
    if header.get("format_version") != STORE_VERSION:
        raise ModelFileError(
            f"unsupported store format version {header.get('format_version')}")
    store = DatasetStore()
    offset = 0
    for entry in header["series"]:
        hours = entry["hours"]
        nbytes = hours * 8 + hours
        chunk = payload[offset:offset + nbytes]
        if len(chunk) < nbytes:
            raise ModelFileError("store file truncated")
        values = np.frombuffer(chunk[:hours * 8], dtype=np.float64).copy()
        missing = np.frombuffer(chunk[hours * 8:], dtype=np.uint8).astype(bool)
        start = dt.datetime.fromisoformat(entry["start"])
        store.series[entry["id"]] = HourlySeries(entry["id"], start, values,
                                                 missing)
        offset += nbytes
    if offset != len(payload):
        raise ModelFileError("store file has trailing bytes")
    return store


# -- synthetic data --------------------------------------------------------


def synthetic_series(series_id="synth1", days=1095,
                     start=dt.date(2015, 1, 1), *, base=10000.0,
                     daily_amp=1500.0, weekly_amp=600.0, yearly_amp=800.0,
                     noise=120.0, phase_hours=0.0, seed=0) -> HourlySeries:
    """Three superposed sinusoids (periods 24, 168 and 8766 hours) plus
    Gaussian noise; defaults keep the load safely positive."""
    t = np.arange(days * 24, dtype=np.float64) + phase_hours
    values = (base
              + daily_amp * np.sin(2.0 * np.pi * t / 24.0)
              + weekly_amp * np.sin(2.0 * np.pi * t / 168.0)
              + yearly_amp * np.sin(2.0 * np.pi * t / 8766.0))
    if noise:
        values = values + np.random.default_rng(seed).normal(0.0, noise,
                                                             t.size)
    return HourlySeries(series_id, dt.datetime.combine(start, dt.time()),
                        values, np.zeros(t.size, dtype=bool))


def synthetic_store(n_series=4, days=1095, start=dt.date(2015, 1, 1),
                    seed=0, noise=120.0) -> DatasetStore:
    """Store of related series with staggered levels and phases."""
    store = DatasetStore()
    for i in range(n_series):
        base = 8000.0 + 1500.0 * i
        scale = base / 10000.0
        sid = f"synth{i + 1}"
        store.series[sid] = synthetic_series(
            sid, days, start, base=base, daily_amp=1500.0 * scale,
            weekly_amp=600.0 * scale, yearly_amp=800.0 * scale,
            noise=noise * scale, phase_hours=3.0 * i, seed=(seed, i))
    return store
