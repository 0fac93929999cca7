"""Append-only reading store.

One line per accepted frame: ``<received_at ISO-8601>|<raw frame>\\n``.
"""
from __future__ import annotations

import csv
import os
import threading
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from rainflag.dataio import DailyRecord, write_records
from rainflag.errors import DataError, UnknownDevice
from rainflag.telemetry import TelemetryMessage, aggregate_daily, parse_telemetry


class StoreError(Exception):
    """Store I/O failure; the store file is left as it was before the append."""


class CorruptStoreLine(DataError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"store line {line_no}: {detail}")
        self.line_no = line_no


@dataclass(frozen=True)
class StoredReading:
    received_at: datetime
    message: TelemetryMessage
    raw: str

    def to_line(self) -> str:
        return f"{self.received_at.isoformat()}|{self.raw}\n"


def parse_store_line(line: str, line_no: int = 0) -> StoredReading:
    stamp, sep, raw = line.rstrip("\n").partition("|")
    if not sep:
        raise CorruptStoreLine(line_no, "missing '|' separator")
    try:
        received_at = datetime.fromisoformat(stamp)
    except ValueError:
        raise CorruptStoreLine(line_no, f"bad timestamp {stamp!r}") from None
    if received_at.tzinfo is None:
        raise CorruptStoreLine(line_no, "timestamp lacks a UTC offset")
    try:
        message = parse_telemetry(raw)
    except DataError as exc:
        raise CorruptStoreLine(line_no, f"{exc.name}: {exc}") from None
    return StoredReading(received_at, message, raw)


def iter_store(path: str | Path) -> Iterator[StoredReading]:
    path = Path(path)
    if not path.exists():
        return
    with path.open(encoding="ascii") as fh:
        for n, line in enumerate(fh, 1):
            if not line.endswith("\n"):
                # a torn final write never became visible as a full line
                break
            yield parse_store_line(line, n)


def _drop_torn_tail(path: Path) -> None:
    # a crash mid-append can leave a partial last line; cut back to the last newline
    if not path.exists():
        return
    with path.open("r+b") as fh:
        data = fh.read()
        if data and not data.endswith(b"\n"):
            fh.truncate(data.rfind(b"\n") + 1)


class ReadingStore:
    """Thread-safe appender with a per-device latest-reading index."""

    def __init__(self, path: str | Path, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self._latest: dict[str, StoredReading] = {}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        _drop_torn_tail(self.path)
        for reading in iter_store(self.path):
            self._remember(reading)
        try:
            self._fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        except OSError as exc:
            raise StoreError(f"cannot open store {self.path}: {exc}") from exc

    def _remember(self, reading: StoredReading) -> None:
        current = self._latest.get(reading.message.device_id)
        if current is None or reading.message.timestamp >= current.message.timestamp:
            self._latest[reading.message.device_id] = reading

    def append(self, raw: str, message: TelemetryMessage, received_at: datetime | None = None) -> StoredReading:
        reading = StoredReading(received_at or datetime.now(timezone.utc), message, raw)
        data = reading.to_line().encode("ascii")
        with self._lock:
            size = os.fstat(self._fd).st_size
            try:
                written = os.write(self._fd, data)
                if written != len(data):
                    raise OSError(f"short write ({written} of {len(data)} bytes)")
                if self.fsync:
                    os.fsync(self._fd)
            except OSError as exc:
                try:
                    os.ftruncate(self._fd, size)
                except OSError:
                    pass
                raise StoreError(str(exc)) from exc
            self._remember(reading)
        return reading

    def latest(self, device_id: str) -> StoredReading | None:
        with self._lock:
            return self._latest.get(device_id)

    def close(self) -> None:
        with self._lock:
            if self._fd >= 0:
                os.fsync(self._fd)
                os.close(self._fd)
                self._fd = -1


def load_station_map(path: str | Path) -> dict[str, str]:
    """Read a ``device_id,station_id`` CSV."""
    mapping: dict[str, str] = {}
    with Path(path).open(newline="", encoding="utf-8-sig") as fh:
        for row in csv.DictReader(fh):
            mapping[row["device_id"].strip()] = row["station_id"].strip()
    return mapping


def export_records(
    store_path: str | Path,
    station_map: Mapping[str, str],
    out_path: str | Path,
) -> tuple[list[DailyRecord], list[UnknownDevice]]:
    """Aggregate the whole store into a daily records CSV.

    Unknown devices are left out of the CSV and returned as warnings.
    """
    records, warnings = aggregate_daily((r.message for r in iter_store(store_path)), station_map)
    write_records(out_path, records)
    return records, warnings
