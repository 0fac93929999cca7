"""Seeded synthetic stations, daily rainfall and gauge telemetry.

Rainfall follows a planted linear spatial recurrence::

    p(t+1) = clip(base + phi * S @ p(t) + common_shock(t) + local_noise(t), 0)

where ``S`` is the row-normalized inverse-distance matrix of the stations
and ``base`` rises with altitude. The common shock makes the noise spatially
correlated, as real synoptic rain is.
"""
from __future__ import annotations

from collections.abc import Sequence
from datetime import date, datetime, timedelta, timezone

import numpy as np

from rainflag.dataio import DailyRecord, Station
from rainflag.graph import AdjacencyScheme, build_adjacency
from rainflag.telemetry import TelemetryMessage

FIXTURE_SEED = 20240430
FIXTURE_START = date(2023, 1, 1)


def make_stations(n: int, seed: int = FIXTURE_SEED, center=(-16.5, -68.15), spread_deg: float = 0.8) -> list[Station]:
    rng = np.random.default_rng(seed)
    lat = center[0] + rng.uniform(-spread_deg, spread_deg, n)
    lon = center[1] + rng.uniform(-spread_deg, spread_deg, n)
    alt = rng.uniform(2500.0, 4500.0, n)
    return [
        Station(f"ST{i + 1:02d}", f"Synthetic station {i + 1}",
                round(float(lat[i]), 5), round(float(lon[i]), 5), round(float(alt[i]), 1))
        for i in range(n)
    ]


def simulate_rainfall(
    stations: Sequence[Station],
    days: int,
    seed: int = FIXTURE_SEED,
    phi: float = 0.85,
    mean_mm: float = 5.0,
    altitude_effect_mm: float = 3.0,
    common_sd: float = 1.2,
    local_sd: float = 0.4,
) -> np.ndarray:
    """(days, stations) rainfall matrix in mm, rounded to 0.1 mm."""
    rng = np.random.default_rng(seed + 1)
    adj = build_adjacency(stations, AdjacencyScheme()).adjacency
    mix = adj / adj.sum(axis=1, keepdims=True)
    alt = np.array([s.altitude_m for s in stations])
    alt_z = (alt - alt.mean()) / (alt.std() or 1.0)
    base = (mean_mm + altitude_effect_mm * alt_z) * (1 - phi)
    p = np.full(len(stations), mean_mm)
    out = np.empty((days, len(stations)))
    for t in range(days):
        shock = common_sd * rng.standard_normal() + local_sd * rng.standard_normal(len(stations))
        p = np.maximum(base + phi * mix @ p + shock, 0.0)
        out[t] = p
    return np.round(out, 1)


def make_fixture(
    n_stations: int = 5,
    days: int = 200,
    seed: int = FIXTURE_SEED,
    start: date = FIXTURE_START,
) -> tuple[list[Station], list[DailyRecord]]:
    stations = make_stations(n_stations, seed)
    rain = simulate_rainfall(stations, days, seed)
    records = [
        DailyRecord(s.station_id, start + timedelta(days=t), float(rain[t, j]))
        for j, s in enumerate(stations)
        for t in range(days)
    ]
    return stations, records


def simulate_telemetry(
    device_ids: Sequence[str],
    days: int,
    start: date = FIXTURE_START,
    seed: int = FIXTURE_SEED,
    reports_per_day: int = 96,
    heavy_day_prob: float = 0.2,
) -> list[TelemetryMessage]:
    """Reports every 24h/reports_per_day for each device.

    Each device-day is either light (mean ~6 tips) or, with probability
    ``heavy_day_prob``, heavy (mean ~70 tips). Tips per report are Poisson.
    """
    rng = np.random.default_rng(seed + 2)
    step = timedelta(seconds=86400 // reports_per_day)
    t0 = datetime(start.year, start.month, start.day, tzinfo=timezone.utc)
    out = []
    for d in range(days):
        for dev in device_ids:
            daily_mean = 70.0 if rng.random() < heavy_day_prob else 6.0
            tips = rng.poisson(daily_mean / reports_per_day, reports_per_day)
            for k in range(reports_per_day):
                out.append(
                    TelemetryMessage(
                        device_id=dev,
                        timestamp=t0 + timedelta(days=d) + k * step,
                        tip_count=int(tips[k]),
                        temp_c=round(float(rng.uniform(-5, 25)), 1),
                        soil_pct=round(float(rng.uniform(0, 100)), 1),
                        hum_pct=round(float(rng.uniform(0, 100)), 1),
                        uv_mw_cm2=round(float(rng.uniform(0, 12)), 2),
                        batt_v=round(float(rng.uniform(6.0, 7.4)), 2),
                    )
                )
    return out
