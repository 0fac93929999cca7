"""Station and daily-record CSV ingestion, cleaning and sample construction.

CSV layouts::

    stations: station_id,name,latitude_deg,longitude_deg,altitude_m
    records:  station_id,date,precip_mm      (ISO dates, empty precip = missing)
"""
from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from rainflag.errors import (
    AllMissingStation,
    DuplicateRecord,
    DuplicateStation,
    EmptyDataset,
    EmptySplit,
    MalformedRow,
    NegativePrecip,
    RangeViolation,
    SpanTooShort,
)

STATION_HEADER = ["station_id", "name", "latitude_deg", "longitude_deg", "altitude_m"]
RECORD_HEADER = ["station_id", "date", "precip_mm"]

DEFAULT_WINDOW = 7
DEFAULT_SPLIT = (0.70, 0.20, 0.10)
DEFAULT_MAX_MISSING = 0.20


@dataclass(frozen=True)
class Station:
    station_id: str
    name: str
    latitude_deg: float
    longitude_deg: float
    altitude_m: float


@dataclass(frozen=True)
class DailyRecord:
    station_id: str
    date: date
    precip_mm: float | None  # None means missing


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def inverse(self, features: np.ndarray) -> np.ndarray:
        return features * self.std + self.mean


@dataclass(frozen=True)
class SampleSet:
    """Windowed graph snapshots.

    ``features`` has shape (num_dates, num_stations, feature_dim) and
    ``targets`` (num_dates, num_stations); the sample at ``dates[k]`` predicts
    rainfall on the following day.
    """

    dates: tuple[date, ...]
    node_order: tuple[str, ...]
    features: np.ndarray
    targets: np.ndarray
    standardization: Standardization | None = None

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]

    def block(self, start: int, stop: int) -> SampleSet:
        return replace(
            self,
            dates=self.dates[start:stop],
            features=self.features[start:stop],
            targets=self.targets[start:stop],
        )


def _check_header(header: list[str] | None, expected: list[str], path: Path) -> None:
    if header is None:
        raise MalformedRow(1, f"{path}: missing header")
    if [h.strip().lstrip("﻿") for h in header] != expected:
        raise MalformedRow(1, f"{path}: header must be {','.join(expected)}")


def _read_rows(path: str | Path, expected: list[str]) -> Iterable[tuple[int, list[str]]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), expected, path)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected):
                raise MalformedRow(reader.line_num, f"expected {len(expected)} columns, got {len(row)}")
            yield reader.line_num, row


def load_stations(path: str | Path) -> list[Station]:
    stations: list[Station] = []
    seen: set[str] = set()
    for line, row in _read_rows(path, STATION_HEADER):
        sid, name = row[0].strip(), row[1].strip()
        if not sid:
            raise MalformedRow(line, "empty station_id")
        try:
            lat, lon, alt = (float(v) for v in row[2:])
        except ValueError:
            raise MalformedRow(line, "non-numeric coordinate or altitude") from None
        if not all(math.isfinite(v) for v in (lat, lon, alt)):
            raise MalformedRow(line, "non-finite coordinate or altitude")
        if not -90.0 <= lat <= 90.0:
            raise RangeViolation(f"row {line}: latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise RangeViolation(f"row {line}: longitude {lon} outside [-180, 180]")
        if sid in seen:
            raise DuplicateStation(f"row {line}: station {sid!r} appears twice")
        seen.add(sid)
        stations.append(Station(sid, name, lat, lon, alt))
    return stations


_UNIT_RE = re.compile(r"\s*mm\s*$", re.IGNORECASE)


def clean_precip_value(raw: str) -> float | None:
    """Parse a scraped precipitation cell.

    Strips whitespace and a trailing ``mm`` unit. When both ``,`` and ``.``
    appear, the rightmost is the decimal mark and the other a thousands
    separator. A lone comma is a decimal comma (``12,5`` -> 12.5); repeated
    commas are thousands separators. Inner spaces are thousands separators.
    Returns None for an empty cell.
    """
    text = _UNIT_RE.sub("", raw.strip()).strip()
    if not text:
        return None
    text = text.replace(" ", "").replace("\u00a0", "")
    if "," in text and "." in text:
        if text.rfind(",") > text.rfind("."):
            text = text.replace(".", "").replace(",", ".")
        else:
            text = text.replace(",", "")
    elif text.count(",") > 1:
        text = text.replace(",", "")
    elif "," in text:
        text = text.replace(",", ".")
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {raw!r}")
    return value


def load_records(path: str | Path) -> list[DailyRecord]:
    records: list[DailyRecord] = []
    seen: set[tuple[str, date]] = set()
    for line, row in _read_rows(path, RECORD_HEADER):
        sid = row[0].strip()
        if not sid:
            raise MalformedRow(line, "empty station_id")
        try:
            day = date.fromisoformat(row[1].strip())
        except ValueError:
            raise MalformedRow(line, f"bad ISO date {row[1]!r}") from None
        try:
            value = clean_precip_value(row[2])
        except ValueError:
            raise MalformedRow(line, f"unparseable precipitation {row[2]!r}") from None
        if value is not None and value < 0:
            raise NegativePrecip(f"row {line}: {value} mm")
        if (sid, day) in seen:
            raise DuplicateRecord(f"row {line}: second record for {sid} on {day}")
        seen.add((sid, day))
        records.append(DailyRecord(sid, day, value))
    return records


def write_records(path: str | Path, records: Iterable[DailyRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        for r in records:
            writer.writerow([r.station_id, r.date.isoformat(), "" if r.precip_mm is None else repr(r.precip_mm)])


def write_stations(path: str | Path, stations: Iterable[Station]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATION_HEADER)
        for s in stations:
            writer.writerow([s.station_id, s.name, repr(s.latitude_deg), repr(s.longitude_deg), repr(s.altitude_m)])


def date_span(records: Iterable[DailyRecord]) -> tuple[date, date]:
    days = [r.date for r in records]
    if not days:
        raise EmptyDataset("no records")
    return min(days), max(days)


def _days(first: date, last: date) -> list[date]:
    return [first + timedelta(days=k) for k in range((last - first).days + 1)]


def drop_sparse_stations(
    records: Sequence[DailyRecord],
    stations: Sequence[Station],
    max_missing_frac: float = DEFAULT_MAX_MISSING,
) -> tuple[list[DailyRecord], list[Station]]:
    if not 0.0 <= max_missing_frac <= 1.0:
        raise ValueError("max_missing_frac must lie in [0, 1]")
    first, last = date_span(records)
    span = (last - first).days + 1
    present: dict[str, int] = defaultdict(int)
    for r in records:
        if r.precip_mm is not None:
            present[r.station_id] += 1
    keep = [s for s in stations if (span - present[s.station_id]) / span <= max_missing_frac]
    if not keep:
        raise EmptyDataset(f"every station exceeds {max_missing_frac:.0%} missing days")
    kept_ids = {s.station_id for s in keep}
    return [r for r in records if r.station_id in kept_ids], keep


def interpolate_missing(records: Sequence[DailyRecord]) -> list[DailyRecord]:
    """Fill gaps per station by linear interpolation in time.

    The output covers every day of the dataset's full span for every station
    that appears, including days that had no record at all. Gaps before the
    first or after the last present value take that value.
    """
    first, last = date_span(records)
    days = _days(first, last)
    by_station: dict[str, dict[date, float | None]] = defaultdict(dict)
    for r in records:
        by_station[r.station_id][r.date] = r.precip_mm
    out: list[DailyRecord] = []
    t = np.arange(len(days), dtype=float)
    for sid in sorted(by_station):
        series = by_station[sid]
        values = np.array([np.nan if series.get(d) is None else series[d] for d in days], dtype=float)
        known = ~np.isnan(values)
        if not known.any():
            raise AllMissingStation(f"station {sid!r} has no present values")
        # np.interp clamps outside the known range, which is the nearest-fill rule
        filled = np.where(known, values, np.interp(t, t[known], values[known]))
        out.extend(DailyRecord(sid, d, float(v)) for d, v in zip(days, filled))
    return out


def precip_matrix(
    records: Sequence[DailyRecord],
    node_order: Sequence[str],
    first: date | None = None,
    last: date | None = None,
) -> tuple[list[date], np.ndarray]:
    """Dense (num_days, num_stations) matrix, by default over the records' date span.

    Missing cells are NaN; records outside [first, last] are ignored.
    """
    if first is None or last is None:
        span_first, span_last = date_span(records)
        first = first or span_first
        last = last or span_last
    days = _days(first, last)
    col = {sid: j for j, sid in enumerate(node_order)}
    mat = np.full((len(days), len(node_order)), np.nan)
    for r in records:
        j = col.get(r.station_id)
        if j is not None and r.precip_mm is not None and first <= r.date <= last:
            mat[(r.date - first).days, j] = r.precip_mm
    return days, mat


def altitude_zscores(stations: Sequence[Station]) -> tuple[np.ndarray, float, float]:
    alt = np.array([s.altitude_m for s in stations], dtype=float)
    mean = float(alt.mean())
    std = float(alt.std())
    if std == 0.0:
        std = 1.0
    return (alt - mean) / std, mean, std


def build_features(window: np.ndarray, altitude_z: np.ndarray) -> np.ndarray:
    """Feature matrix for one snapshot.

    ``window`` is (W, num_stations) with the oldest day first. Each row of
    the result is ``[precip(t-W+1), ..., precip(t), altitude_z]``.
    """
    return np.column_stack([window.T, altitude_z])


def make_samples(
    records: Sequence[DailyRecord],
    stations: Sequence[Station],
    window_length: int = DEFAULT_WINDOW,
) -> SampleSet:
    if window_length < 1:
        raise ValueError("window_length must be positive")
    node_order = [s.station_id for s in stations]
    days, mat = precip_matrix(records, node_order)
    if np.isnan(mat).any():
        bad = [node_order[j] for j in np.unique(np.nonzero(np.isnan(mat))[1])]
        raise SpanTooShort(f"records incomplete for stations {bad}; interpolate first")
    span = len(days)
    if span < window_length + 1:
        raise SpanTooShort(f"{span} days cannot feed a {window_length}-day window plus a target")
    alt_z, _, _ = altitude_zscores(stations)
    n = span - window_length
    features = np.empty((n, len(node_order), window_length + 1))
    targets = np.empty((n, len(node_order)))
    for k in range(n):
        t = k + window_length - 1
        features[k] = build_features(mat[t - window_length + 1 : t + 1], alt_z)
        targets[k] = mat[t + 1]
    sample_dates = tuple(days[window_length - 1 : window_length - 1 + n])
    return SampleSet(sample_dates, tuple(node_order), features, targets)


def split_sizes(n: int, fractions: Sequence[float] = DEFAULT_SPLIT) -> tuple[int, int, int]:
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or not math.isclose(sum(fractions), 1.0):
        raise ValueError("fractions must be three positive numbers summing to 1")
    _, n_val, n_test = (math.floor(n * f) for f in fractions)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) == 0:
        raise EmptySplit(f"{n} samples give split sizes {n_train}/{n_val}/{n_test}")
    return n_train, n_val, n_test


def split_chronological(
    samples: SampleSet, fractions: Sequence[float] = DEFAULT_SPLIT
) -> tuple[SampleSet, SampleSet, SampleSet]:
    n_train, n_val, _ = split_sizes(len(samples), fractions)
    n = len(samples)
    return (
        samples.block(0, n_train),
        samples.block(n_train, n_train + n_val),
        samples.block(n_train + n_val, n),
    )


def fit_standardization(train: SampleSet) -> Standardization:
    if len(train) == 0:
        raise EmptySplit("cannot fit standardization on an empty block")
    flat = train.features.reshape(-1, train.feature_dim)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    std[std == 0.0] = 1.0
    return Standardization(mean, std)


def standardize(samples: SampleSet, fit_on: SampleSet) -> SampleSet:
    """Z-score feature columns with statistics fitted on ``fit_on``.

    Targets stay in millimetres.
    """
    stats = fit_standardization(fit_on)
    return apply_standardization(samples, stats)


def apply_standardization(samples: SampleSet, stats: Standardization) -> SampleSet:
    return replace(samples, features=stats.transform(samples.features), standardization=stats)


def inverse_standardize(samples: SampleSet) -> SampleSet:
    if samples.standardization is None:
        return samples
    return replace(samples, features=samples.standardization.inverse(samples.features), standardization=None)
