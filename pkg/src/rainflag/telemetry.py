"""Gauge report wire format and tip-to-millimetre conversion.

A frame looks like::

    JP,1,<device_id>,<unix_seconds>,<tips>,<temp_c>,<soil_pct>,<hum_pct>,<uv>,<batt_v>*<CK>

``CK`` is the XOR of every byte before ``*``, written as two uppercase hex
digits. Frames are plain ASCII and never longer than 160 bytes.
"""
from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from datetime import date, datetime, timezone

from rainflag.dataio import DailyRecord
from rainflag.errors import (
    BadFrame,
    ChecksumMismatch,
    InvalidField,
    OversizeMessage,
    UnknownDevice,
    UnsupportedVersion,
)

MAX_FRAME_BYTES = 160
MM_PER_TIP = 0.2
PROTOCOL_VERSION = "1"
TALKER = "JP"

_DEVICE_RE = re.compile(r"[A-Za-z0-9-]{1,16}")
_ENVELOPE_RE = re.compile(r"JP,([^,*]*),([^*]*)\*([0-9A-F]{2})")
_INT = r"(0|[1-9][0-9]*)"
_SIGNED_1 = r"(-?(?:0|[1-9][0-9]*)\.[0-9])"
_UNSIGNED_1 = r"((?:0|[1-9][0-9]*)\.[0-9])"
_SIGNED_2 = r"(-?(?:0|[1-9][0-9]*)\.[0-9]{2})"
_UNSIGNED_2 = r"((?:0|[1-9][0-9]*)\.[0-9]{2})"
_PAYLOAD_RE = re.compile(
    ",".join(
        [r"([A-Za-z0-9-]{1,16})", _INT, _INT, _SIGNED_1, _UNSIGNED_1, _UNSIGNED_1, _SIGNED_2, _UNSIGNED_2]
    )
)


def _decimals_ok(value: float, digits: int) -> bool:
    return math.isfinite(value) and float(f"{value:.{digits}f}") == value


@dataclass(frozen=True)
class TelemetryMessage:
    device_id: str
    timestamp: datetime
    tip_count: int
    temp_c: float
    soil_pct: float
    hum_pct: float
    uv_mw_cm2: float
    batt_v: float

    def __post_init__(self):
        if not isinstance(self.device_id, str) or not _DEVICE_RE.fullmatch(self.device_id):
            raise InvalidField(f"device_id {self.device_id!r}")
        ts = self.timestamp
        if not isinstance(ts, datetime) or ts.tzinfo is None:
            raise InvalidField("timestamp must be a timezone-aware datetime")
        ts = ts.astimezone(timezone.utc)
        if ts.microsecond:
            raise InvalidField("timestamp must have whole-second precision")
        if ts.timestamp() < 0:
            raise InvalidField("timestamp before the unix epoch")
        object.__setattr__(self, "timestamp", ts)
        if isinstance(self.tip_count, bool) or not isinstance(self.tip_count, int) or self.tip_count < 0:
            raise InvalidField(f"tip_count {self.tip_count!r}")
        for name, digits in (("temp_c", 1), ("soil_pct", 1), ("hum_pct", 1), ("uv_mw_cm2", 2), ("batt_v", 2)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidField(f"{name} {value!r}")
            # + 0.0 folds -0.0 into 0.0 so the encoding is canonical
            value = float(value) + 0.0
            if not _decimals_ok(value, digits):
                raise InvalidField(f"{name} {value!r} needs at most {digits} fractional digits")
            object.__setattr__(self, name, value)
        for name in ("soil_pct", "hum_pct"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise InvalidField(f"{name} out of [0, 100]")
        if not 0.0 <= self.batt_v <= 25.0:
            raise InvalidField("batt_v out of [0, 25]")

    @property
    def unix_seconds(self) -> int:
        return int(self.timestamp.timestamp())

    @property
    def utc_day(self) -> date:
        return self.timestamp.date()


def checksum(payload: bytes) -> str:
    ck = 0
    for b in payload:
        ck ^= b
    return f"{ck:02X}"


def encode_telemetry(msg: TelemetryMessage) -> str:
    body = ",".join(
        [
            TALKER,
            PROTOCOL_VERSION,
            msg.device_id,
            str(msg.unix_seconds),
            str(msg.tip_count),
            f"{msg.temp_c:.1f}",
            f"{msg.soil_pct:.1f}",
            f"{msg.hum_pct:.1f}",
            f"{msg.uv_mw_cm2:.2f}",
            f"{msg.batt_v:.2f}",
        ]
    )
    frame = f"{body}*{checksum(body.encode('ascii'))}"
    if len(frame) > MAX_FRAME_BYTES:
        raise OversizeMessage(f"frame is {len(frame)} bytes, limit {MAX_FRAME_BYTES}")
    return frame


def parse_telemetry(raw: str | bytes) -> TelemetryMessage:
    """Decode one frame, strictly.

    Checks run in order: envelope grammar, protocol version, checksum, field
    grammar, field ranges. Any failure raises a ``TelemetryError`` subclass;
    nothing else escapes for any input.
    """
    if isinstance(raw, str):
        try:
            data = raw.encode("ascii")
        except UnicodeEncodeError:
            raise BadFrame("non-ASCII input") from None
    elif isinstance(raw, (bytes, bytearray)):
        data = bytes(raw)
    else:
        raise BadFrame(f"expected str or bytes, got {type(raw).__name__}")
    if len(data) > MAX_FRAME_BYTES:
        raise BadFrame(f"frame longer than {MAX_FRAME_BYTES} bytes")
    if any(b < 0x20 or b > 0x7E for b in data):
        raise BadFrame("non-printable byte in frame")
    text = data.decode("ascii")

    env = _ENVELOPE_RE.fullmatch(text)
    if env is None:
        raise BadFrame("frame does not match JP,<version>,...*<CK>")
    version, payload, ck = env.groups()
    if version != PROTOCOL_VERSION:
        if re.fullmatch(r"[0-9]+", version):
            raise UnsupportedVersion(f"protocol version {version}")
        raise BadFrame(f"bad version token {version!r}")
    body = text[: text.index("*")]
    expected = checksum(body.encode("ascii"))
    if ck != expected:
        raise ChecksumMismatch(f"checksum {ck}, computed {expected}")

    fields = _PAYLOAD_RE.fullmatch(payload)
    if fields is None:
        raise BadFrame("payload fields do not match the grammar")
    device_id, unix_s, tips, temp, soil, hum, uv, batt = fields.groups()
    try:
        ts = datetime.fromtimestamp(int(unix_s), tz=timezone.utc)
    except (OverflowError, OSError, ValueError):
        raise InvalidField(f"timestamp {unix_s} out of range") from None
    return TelemetryMessage(
        device_id=device_id,
        timestamp=ts,
        tip_count=int(tips),
        temp_c=float(temp),
        soil_pct=float(soil),
        hum_pct=float(hum),
        uv_mw_cm2=float(uv),
        batt_v=float(batt),
    )


def tips_to_mm(tip_count: int) -> float:
    """Rain depth for a number of bucket tips, rounded to 0.1 mm."""
    if tip_count < 0:
        raise ValueError("tip_count must be non-negative")
    return round(tip_count * MM_PER_TIP, 1)


def aggregate_daily(
    messages: Iterable[TelemetryMessage],
    station_map: Mapping[str, str],
) -> tuple[list[DailyRecord], list[UnknownDevice]]:
    """Sum tips per (station, UTC day).

    Exact ``(device_id, timestamp)`` resends are dropped, first one wins.
    Messages from devices missing in ``station_map`` are skipped and returned
    as ``UnknownDevice`` warnings, one per message. Output is sorted by
    station then date; days without messages produce no record.
    """
    seen: set[tuple[str, datetime]] = set()
    tips: dict[tuple[str, date], int] = {}
    warnings: list[UnknownDevice] = []
    for msg in messages:
        key = (msg.device_id, msg.timestamp)
        if key in seen:
            continue
        seen.add(key)
        station = station_map.get(msg.device_id)
        if station is None:
            warnings.append(UnknownDevice(msg.device_id))
            continue
        day_key = (station, msg.utc_day)
        tips[day_key] = tips.get(day_key, 0) + msg.tip_count
    records = [
        DailyRecord(station_id=s, date=d, precip_mm=tips_to_mm(n))
        for (s, d), n in sorted(tips.items())
    ]
    return records, warnings
