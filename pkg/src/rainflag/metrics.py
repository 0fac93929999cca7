"""Regression metrics, heavy-rain event scores and heavy-day climatology."""
from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rainflag.dataio import DailyRecord, Station, date_span
from rainflag.errors import EmptyDataset, EmptyInput, LengthMismatch, ZeroVariance

HEAVY_THRESHOLD_MM = 8.0
DAYS_PER_YEAR = 365.25


def _pair(y, y_hat, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise LengthMismatch(f"{y.size} observations vs {y_hat.size} predictions")
    if y.size < min_len:
        raise EmptyInput(f"need at least {min_len} values, got {y.size}")
    return y, y_hat


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def pearson_r(y, y_hat) -> float:
    """Sample Pearson correlation between observations and predictions."""
    y, y_hat = _pair(y, y_hat, min_len=2)
    dy = y - y.mean()
    dp = y_hat - y_hat.mean()
    syy = float(dy @ dy)
    spp = float(dp @ dp)
    if syy == 0.0 or spp == 0.0:
        raise ZeroVariance("pearson_r is undefined for a constant input")
    # the n-1 factors of covariance and both deviations cancel; one sqrt keeps
    # r = +-1 exact for exactly proportional inputs
    return float(dy @ dp) / float(np.sqrt(syy * spp))


def heavy_event_scores(y, y_hat, threshold_mm: float = HEAVY_THRESHOLD_MM) -> tuple[float | None, float | None]:
    """Precision and recall of heavy-day detection; None where undefined."""
    y, y_hat = _pair(y, y_hat, min_len=0)
    actual = y >= threshold_mm
    predicted = y_hat >= threshold_mm
    tp = int(np.sum(actual & predicted))
    fp = int(np.sum(~actual & predicted))
    fn = int(np.sum(actual & ~predicted))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    return precision, recall


@dataclass(frozen=True)
class EvalReport:
    mse: float
    mae: float
    pearson_r: float | None
    n: int
    heavy_precision: float | None
    heavy_recall: float | None

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(y, y_hat, threshold_mm: float = HEAVY_THRESHOLD_MM) -> EvalReport:
    y, y_hat = _pair(y, y_hat)
    try:
        r = pearson_r(y, y_hat)
    except (ZeroVariance, EmptyInput):
        r = None
    precision, recall = heavy_event_scores(y, y_hat, threshold_mm)
    return EvalReport(mse(y, y_hat), mae(y, y_hat), r, int(y.size), precision, recall)


@dataclass(frozen=True)
class ClimatologyRow:
    station_id: str
    latitude_deg: float
    longitude_deg: float
    heavy_days: int
    span_days: int
    avg_heavy_days_per_year: float


CLIMATOLOGY_HEADER = ["station_id", "latitude_deg", "longitude_deg", "avg_heavy_days_per_year"]


def heavy_climatology(
    records: Sequence[DailyRecord],
    stations: Sequence[Station],
    threshold_mm: float = HEAVY_THRESHOLD_MM,
) -> list[ClimatologyRow]:
    """Average yearly count of days at or above ``threshold_mm`` per station.

    The span is the dataset's full inclusive date range; a year is 365.25
    days. Rows come back sorted by station_id, one per entry of ``stations``.
    """
    if not records or not stations:
        raise EmptyDataset("climatology needs records and stations")
    first, last = date_span(records)
    span_days = (last - first).days + 1
    counts: dict[str, int] = defaultdict(int)
    for r in records:
        if r.precip_mm is not None and r.precip_mm >= threshold_mm:
            counts[r.station_id] += 1
    years = span_days / DAYS_PER_YEAR
    return [
        ClimatologyRow(
            s.station_id, s.latitude_deg, s.longitude_deg,
            counts[s.station_id], span_days, counts[s.station_id] / years,
        )
        for s in sorted(stations, key=lambda s: s.station_id)
    ]


def write_climatology(path: str | Path, rows: Sequence[ClimatologyRow]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLIMATOLOGY_HEADER)
        for row in rows:
            writer.writerow([row.station_id, repr(row.latitude_deg), repr(row.longitude_deg),
                             f"{row.avg_heavy_days_per_year:.6f}"])
