"""End-to-end workflows behind the CLI: train, evaluate, predict, climatology."""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from rainflag import dataio, metrics
from rainflag.checkpoint import Checkpoint
from rainflag.config import RunConfig
from rainflag.dataio import DailyRecord, SampleSet, Station
from rainflag.errors import FeatureDimMismatch, NodeOrderMismatch, SpanTooShort
from rainflag.graph import StationGraph, build_adjacency
from rainflag.model import flag_heavy, forward, init_model, train
from rainflag.schemas import EvalReportOut, ForecastEntry, ForecastOut, TrainReportOut, dumps

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.json"
TRAIN_REPORT_NAME = "train_report.json"
EVAL_REPORT_NAME = "eval_report.json"
FORECAST_NAME = "forecast.json"
CLIMATOLOGY_NAME = "climatology.csv"


@dataclass
class Prepared:
    stations: list[Station]
    records: list[DailyRecord]
    graph: StationGraph
    train: SampleSet
    val: SampleSet
    test: SampleSet


def clean(
    stations: Sequence[Station], records: Sequence[DailyRecord], max_missing_frac: float
) -> tuple[list[Station], list[DailyRecord]]:
    kept_records, kept_stations = dataio.drop_sparse_stations(records, stations, max_missing_frac)
    filled = dataio.interpolate_missing(kept_records)
    dropped = len(stations) - len(kept_stations)
    if dropped:
        log.info("dropped %d sparse station(s)", dropped)
    return kept_stations, filled


def prepare(stations: Sequence[Station], records: Sequence[DailyRecord], cfg: RunConfig) -> Prepared:
    kept, filled = clean(stations, records, cfg.max_missing_frac)
    samples = dataio.make_samples(filled, kept, cfg.window_length)
    train_set, val_set, test_set = dataio.split_chronological(samples, cfg.split)
    stats = dataio.fit_standardization(train_set)
    graph = build_adjacency(kept, cfg.adjacency_scheme())
    return Prepared(
        kept, filled, graph,
        dataio.apply_standardization(train_set, stats),
        dataio.apply_standardization(val_set, stats),
        dataio.apply_standardization(test_set, stats),
    )


def run_train(cfg: RunConfig) -> tuple[Checkpoint, TrainReportOut]:
    stations = dataio.load_stations(cfg.stations)
    records = dataio.load_records(cfg.records)
    data = prepare(stations, records, cfg)
    gcn = cfg.gcn_config()
    model = init_model(gcn, data.train.feature_dim)
    a_hat = data.graph.normalized_adjacency
    log.info("training %s on %d/%d/%d samples", gcn.gcl_widths, len(data.train), len(data.val), len(data.test))
    model, report = train(model, a_hat, data.train, data.val, gcn)

    _, alt_mean, alt_std = dataio.altitude_zscores(data.stations)
    ckpt = Checkpoint(
        model=model,
        node_order=data.graph.node_order,
        altitude_m=tuple(s.altitude_m for s in data.stations),
        altitude_mean=alt_mean,
        altitude_std=alt_std,
        standardization=data.train.standardization,
        adjacency_scheme=cfg.adjacency_scheme(),
        normalized_adjacency=a_hat,
        split_fractions=tuple(cfg.split),
        max_missing_frac=cfg.max_missing_frac,
    )
    out = TrainReportOut(
        model=cfg.model.upper() if not cfg.gcl_widths else "custom",
        gcl_widths=list(gcn.gcl_widths),
        best_val_mse=report.val_loss_history[report.best_epoch],
        n_train=len(data.train),
        n_val=len(data.val),
        n_test=len(data.test),
        **report.as_dict(),
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt.save(out_dir / CHECKPOINT_NAME)
    (out_dir / TRAIN_REPORT_NAME).write_text(dumps(out), encoding="utf-8")
    return ckpt, out


def _check_nodes(ckpt: Checkpoint, node_order: Sequence[str]) -> None:
    if tuple(node_order) != tuple(ckpt.node_order):
        raise NodeOrderMismatch(
            f"checkpoint stations {list(ckpt.node_order)} differ from data stations {list(node_order)}"
        )


def run_evaluate(checkpoint_path: str | Path, cfg: RunConfig) -> EvalReportOut:
    """Score a checkpoint on the held-out test block of the given data.

    Cleaning, windowing and splitting reuse the settings stored in the
    checkpoint; metrics use the clamped (reported) predictions.
    """
    ckpt = Checkpoint.load(checkpoint_path)
    gcn = ckpt.model.config
    stations = dataio.load_stations(cfg.stations)
    records = dataio.load_records(cfg.records)
    kept, filled = clean(stations, records, ckpt.max_missing_frac)
    _check_nodes(ckpt, [s.station_id for s in kept])
    samples = dataio.make_samples(filled, kept, gcn.window_length)
    if samples.feature_dim != ckpt.model.feature_dim or len(ckpt.standardization.mean) != samples.feature_dim:
        raise FeatureDimMismatch(f"data feature dim {samples.feature_dim}, checkpoint {ckpt.model.feature_dim}")
    _, _, test = dataio.split_chronological(samples, ckpt.split_fractions)
    test = dataio.apply_standardization(test, ckpt.standardization)
    rain, _ = flag_heavy(forward(ckpt.model, ckpt.normalized_adjacency, test.features))
    rep = metrics.evaluate(test.targets, rain, gcn.heavy_threshold_mm)
    out = EvalReportOut(
        threshold_mm=gcn.heavy_threshold_mm, test_start=test.dates[0], test_end=test.dates[-1], **rep.as_dict()
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / EVAL_REPORT_NAME).write_text(dumps(out), encoding="utf-8")
    return out


def forecast_features(ckpt: Checkpoint, records: Sequence[DailyRecord]) -> tuple[np.ndarray, date]:
    """Standardized feature matrix for the day after the last record date."""
    window = ckpt.model.config.window_length
    _, last = dataio.date_span(records)
    first = last - timedelta(days=window - 1)
    present = {r.station_id for r in records}
    absent = [sid for sid in ckpt.node_order if sid not in present]
    if absent:
        raise NodeOrderMismatch(f"no records at all for checkpoint stations {absent}")
    _, mat = dataio.precip_matrix(records, ckpt.node_order, first, last)
    incomplete = [sid for j, sid in enumerate(ckpt.node_order) if np.isnan(mat[:, j]).any()]
    if incomplete:
        raise SpanTooShort(f"stations {incomplete} lack the {window} trailing days ending {last}")
    alt_z = (np.array(ckpt.altitude_m) - ckpt.altitude_mean) / ckpt.altitude_std
    x = dataio.build_features(mat, alt_z)
    return ckpt.standardization.transform(x), last + timedelta(days=1)


def run_predict(checkpoint_path: str | Path, records_path: str | Path, output_dir: str | Path) -> ForecastOut:
    ckpt = Checkpoint.load(checkpoint_path)
    records = dataio.load_records(records_path)
    x, issued_for = forecast_features(ckpt, records)
    threshold = ckpt.model.config.heavy_threshold_mm
    rain, heavy = flag_heavy(forward(ckpt.model, ckpt.normalized_adjacency, x), threshold)
    out = ForecastOut(
        issued_for=issued_for,
        threshold_mm=threshold,
        forecasts=[
            ForecastEntry(station_id=sid, rain_mm=float(r), heavy=bool(h))
            for sid, r, h in zip(ckpt.node_order, rain, heavy)
        ],
    )
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / FORECAST_NAME).write_text(dumps(out), encoding="utf-8")
    return out


def run_climatology(cfg: RunConfig) -> list[metrics.ClimatologyRow]:
    stations = dataio.load_stations(cfg.stations)
    records = dataio.load_records(cfg.records)
    kept, filled = clean(stations, records, cfg.max_missing_frac)
    rows = metrics.heavy_climatology(filled, kept, cfg.heavy_threshold_mm)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_climatology(out_dir / CLIMATOLOGY_NAME, rows)
    return rows
