"""HTTP ingest gateway for SMS-relayed gauge frames."""
from __future__ import annotations

import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Form, Query
from fastapi.responses import JSONResponse

from rainflag.errors import TelemetryError
from rainflag.schemas import StatusError, StatusOk, StoredReadingOut, TelemetryOut
from rainflag.service.store import ReadingStore, StoredReading, StoreError
from rainflag.telemetry import parse_telemetry

log = logging.getLogger(__name__)

STORE_ENV = "RAINFLAG_STORE"


def _reading_out(reading: StoredReading) -> StoredReadingOut:
    m = reading.message
    return StoredReadingOut(
        received_at=reading.received_at,
        raw=reading.raw,
        message=TelemetryOut(
            device_id=m.device_id, timestamp=m.timestamp, tip_count=m.tip_count, temp_c=m.temp_c,
            soil_pct=m.soil_pct, hum_pct=m.hum_pct, uv_mw_cm2=m.uv_mw_cm2, batt_v=m.batt_v,
        ),
    )


def _error(status: int, reason: str) -> JSONResponse:
    return JSONResponse(status_code=status, content=StatusError(reason=reason).model_dump())


def create_app(store_path: str | Path | None = None, fsync: bool = False) -> FastAPI:
    store_path = Path(store_path or os.environ.get(STORE_ENV, "readings.log"))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.store = ReadingStore(store_path, fsync=fsync)
        log.info("gateway storing readings in %s", store_path)
        try:
            yield
        finally:
            app.state.store.close()

    app = FastAPI(title="rainflag gateway", lifespan=lifespan)

    @app.get("/healthz", response_model=StatusOk)
    def healthz():
        return StatusOk()

    # sync handler: FastAPI runs it in a worker thread, the store lock serializes appends
    @app.post("/webhook/sms", response_model=StatusOk, responses={400: {"model": StatusError}, 500: {"model": StatusError}})
    def webhook_sms(From: str = Form(""), Body: str = Form("")):  # noqa: N803 - relay field names
        try:
            message = parse_telemetry(Body)
        except TelemetryError as exc:
            log.info("rejected frame from %r: %s", From, exc)
            return _error(400, exc.name)
        try:
            app.state.store.append(Body, message)
        except StoreError as exc:
            log.error("store append failed: %s", exc)
            return _error(500, "StoreError")
        return StatusOk()

    @app.get("/readings/latest", response_model=StoredReadingOut, responses={404: {"model": StatusError}})
    def latest_reading(device: str = Query(...)):
        reading = app.state.store.latest(device)
        if reading is None:
            return _error(404, "UnknownDevice")
        return _reading_out(reading)

    return app
