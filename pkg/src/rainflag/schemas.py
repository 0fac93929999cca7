"""Pydantic models for every JSON document the package emits.

``python -m rainflag.schemas`` prints the JSON Schemas.
"""
from __future__ import annotations

import json
from datetime import date, datetime
from typing import Literal, Optional

from pydantic import BaseModel, Field


class StatusOk(BaseModel):
    status: Literal["ok"] = "ok"


class StatusError(BaseModel):
    status: Literal["error"] = "error"
    reason: str


class TelemetryOut(BaseModel):
    device_id: str
    timestamp: datetime
    tip_count: int = Field(ge=0)
    temp_c: float
    soil_pct: float = Field(ge=0, le=100)
    hum_pct: float = Field(ge=0, le=100)
    uv_mw_cm2: float
    batt_v: float = Field(ge=0, le=25)


class StoredReadingOut(BaseModel):
    received_at: datetime
    message: TelemetryOut
    raw: str


class TrainReportOut(BaseModel):
    model: str
    gcl_widths: list[int]
    epochs_run: int
    train_loss_history: list[float]
    val_loss_history: list[float]
    best_epoch: int
    best_val_mse: float
    stopped_early: bool
    n_train: int
    n_val: int
    n_test: int


class EvalReportOut(BaseModel):
    mse: float = Field(ge=0, description="mm^2")
    mae: float = Field(ge=0, description="mm")
    pearson_r: Optional[float] = Field(ge=-1 - 1e-12, le=1 + 1e-12, description="null when undefined")
    n: int = Field(ge=1)
    heavy_precision: Optional[float] = Field(ge=0, le=1)
    heavy_recall: Optional[float] = Field(ge=0, le=1)
    threshold_mm: float
    test_start: date
    test_end: date


class ForecastEntry(BaseModel):
    station_id: str
    rain_mm: float = Field(ge=0)
    heavy: bool


class ForecastOut(BaseModel):
    issued_for: date
    threshold_mm: float
    forecasts: list[ForecastEntry]


ALL_SCHEMAS = {
    "train_report": TrainReportOut,
    "eval_report": EvalReportOut,
    "forecast": ForecastOut,
    "stored_reading": StoredReadingOut,
}


def dumps(model: BaseModel) -> str:
    """Deterministic JSON text for an output document."""
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


if __name__ == "__main__":
    print(json.dumps({k: v.model_json_schema() for k, v in ALL_SCHEMAS.items()}, indent=2))
