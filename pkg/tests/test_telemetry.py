from datetime import datetime, timedelta, timezone
from functools import reduce

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rainflag.errors import (
    BadFrame,
    ChecksumMismatch,
    InvalidField,
    OversizeMessage,
    TelemetryError,
    UnknownDevice,
    UnsupportedVersion,
)
from rainflag.telemetry import (
    MAX_FRAME_BYTES,
    TelemetryMessage,
    aggregate_daily,
    encode_telemetry,
    parse_telemetry,
    tips_to_mm,
)

UTC = timezone.utc


def xor_hex(body: str) -> str:
    return "%02X" % reduce(lambda a, b: a ^ b, body.encode("ascii"), 0)


def msg(device="LP-01", ts=1700000000, tips=3, temp=18.5, soil=42.0, hum=55.0, uv=1.25, batt=6.98):
    return TelemetryMessage(device, datetime.fromtimestamp(ts, UTC), tips, temp, soil, hum, uv, batt)


def test_encode_reference_frame():
    body = "JP,1,LP-01,1700000000,3,18.5,42.0,55.0,1.25,6.98"
    # XOR worked out independently of the codec
    assert xor_hex(body) == "17"
    assert encode_telemetry(msg()) == body + "*17"


def test_minimal_message_roundtrip():
    m = msg(device="A", ts=0, tips=0, temp=0.0, soil=0.0, hum=0.0, uv=0.0, batt=0.0)
    frame = encode_telemetry(m)
    assert frame == "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*68"
    assert parse_telemetry(frame) == m


def test_negative_zero_is_canonical():
    assert encode_telemetry(msg(temp=-0.0)).split(",")[5] == "0.0"


def test_wrong_checksum():
    with pytest.raises(ChecksumMismatch):
        parse_telemetry("JP,1,LP-01,1700000000,3,18.5,42.0,55.0,1.25,6.98*00")


def test_unsupported_version():
    body = "JP,2,LP-01,1700000000,3,18.5,42.0,55.0,1.25,6.98"
    with pytest.raises(UnsupportedVersion):
        parse_telemetry(f"{body}*{xor_hex(body)}")


@pytest.mark.parametrize(
    "frame",
    [
        "",
        " JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*68",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*68\n",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*68 ",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*6",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,0.00*6g",
        "XX,1,A,0,0,0.0,0.0,0.0,0.00,0.00*68",
        "JP,x,A,0,0,0.0,0.0,0.0,0.00,0.00*68",
    ],
)
def test_bad_frames(frame):
    with pytest.raises(BadFrame):
        parse_telemetry(frame)


@pytest.mark.parametrize(
    "body",
    [
        "JP,1,A,00,0,0.0,0.0,0.0,0.00,0.00",  # padded integer
        "JP,1,A,0,0,0.00,0.0,0.0,0.00,0.00",  # too many decimals
        "JP,1,A,0,-1,0.0,0.0,0.0,0.00,0.00",  # negative tips
        "JP,1,A,0,0,0,0.0,0.0,0.00,0.00",  # missing decimals
        "JP,1,A_B,0,0,0.0,0.0,0.0,0.00,0.00",  # illegal device char
        "JP,1,ABCDEFGHIJKLMNOPQ,0,0,0.0,0.0,0.0,0.00,0.00",  # 17-char device
        "JP,1,A,0,0,0.0,0.0,0.0,0.00",  # field missing
    ],
)
def test_field_grammar_violations(body):
    with pytest.raises(BadFrame):
        parse_telemetry(f"{body}*{xor_hex(body)}")


@pytest.mark.parametrize(
    "body",
    [
        "JP,1,A,0,0,0.0,100.1,0.0,0.00,0.00",
        "JP,1,A,0,0,0.0,0.0,100.1,0.00,0.00",
        "JP,1,A,0,0,0.0,0.0,0.0,0.00,25.01",
        "JP,1,A,99999999999999999999,0,0.0,0.0,0.0,0.00,0.00",
    ],
)
def test_range_violations(body):
    with pytest.raises(InvalidField):
        parse_telemetry(f"{body}*{xor_hex(body)}")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"device": ""},
        {"device": "has space"},
        {"tips": -1},
        {"soil": 100.5},
        {"hum": -0.1},
        {"batt": 25.5},
        {"temp": 18.55},
        {"uv": 1.255},
        {"temp": float("nan")},
    ],
)
def test_invalid_message_construction(kwargs):
    with pytest.raises(InvalidField):
        msg(**kwargs)


def test_subsecond_and_naive_timestamps_rejected():
    with pytest.raises(InvalidField):
        TelemetryMessage("A", datetime(2024, 1, 1, 0, 0, 0, 500, tzinfo=UTC), 0, 0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(InvalidField):
        TelemetryMessage("A", datetime(2024, 1, 1), 0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_oversize_message():
    with pytest.raises(OversizeMessage):
        encode_telemetry(msg(device="ABCDEFGHIJKLMNOP", temp=1e150))


def test_fixture_corpus_roundtrips(fixtures_dir):
    frames = (fixtures_dir / "frames.txt").read_text().splitlines()
    assert frames
    for frame in frames:
        assert encode_telemetry(parse_telemetry(frame)) == frame


def tenth(lo, hi):
    return st.integers(lo * 10, hi * 10).map(lambda v: v / 10)


def hundredth(lo, hi):
    return st.integers(lo * 100, hi * 100).map(lambda v: v / 100)


messages = st.builds(
    TelemetryMessage,
    device_id=st.from_regex(r"[A-Za-z0-9-]{1,16}", fullmatch=True),
    timestamp=st.integers(0, 4_102_444_800).map(lambda s: datetime.fromtimestamp(s, UTC)),
    tip_count=st.integers(0, 10**6),
    temp_c=tenth(-60, 60),
    soil_pct=tenth(0, 100),
    hum_pct=tenth(0, 100),
    uv_mw_cm2=hundredth(-5, 50),
    batt_v=hundredth(0, 25),
)


@given(messages)
def test_roundtrip_property(m):
    frame = encode_telemetry(m)
    assert len(frame.encode()) <= MAX_FRAME_BYTES
    assert parse_telemetry(frame) == m


@given(messages, st.data())
def test_single_byte_flip_rejected(m, data):
    frame = bytearray(encode_telemetry(m).encode())
    i = data.draw(st.integers(0, len(frame) - 1))
    b = data.draw(st.integers(0, 255).filter(lambda v: v != frame[i]))
    frame[i] = b
    with pytest.raises(TelemetryError):
        parse_telemetry(bytes(frame))


@settings(max_examples=500)
@given(st.binary(max_size=200))
def test_parse_never_crashes(raw):
    try:
        parse_telemetry(raw)
    except TelemetryError:
        pass


@pytest.mark.parametrize("tips,mm", [(0, 0.0), (1, 0.2), (15, 3.0), (40, 8.0), (41, 8.2)])
def test_tips_to_mm(tips, mm):
    assert tips_to_mm(tips) == mm


def day_messages(n=5, tips=3, start=datetime(2024, 3, 1, 6, 0, tzinfo=UTC)):
    return [
        TelemetryMessage("LP-01", start + timedelta(minutes=15 * k), tips, 10.0, 50.0, 50.0, 1.0, 7.0)
        for k in range(n)
    ]


def test_aggregate_sums_tips():
    records, warnings = aggregate_daily(day_messages(), {"LP-01": "S1"})
    assert warnings == []
    assert len(records) == 1
    assert records[0].station_id == "S1"
    assert records[0].date.isoformat() == "2024-03-01"
    assert records[0].precip_mm == 3.0


def test_aggregate_drops_exact_duplicates():
    msgs = day_messages()
    records, _ = aggregate_daily(msgs + [msgs[2]], {"LP-01": "S1"})
    assert records[0].precip_mm == 3.0


def test_aggregate_keeps_distinct_timestamps_with_same_values():
    msgs = day_messages(n=2)
    extra = TelemetryMessage("LP-01", msgs[1].timestamp + timedelta(seconds=1), 3, 10.0, 50.0, 50.0, 1.0, 7.0)
    records, _ = aggregate_daily(msgs + [extra], {"LP-01": "S1"})
    assert records[0].precip_mm == 1.8


def test_aggregate_utc_day_boundary():
    a = TelemetryMessage("LP-01", datetime(2024, 3, 1, 23, 50, tzinfo=UTC), 2, 0.0, 0.0, 0.0, 0.0, 0.0)
    b = TelemetryMessage("LP-01", datetime(2024, 3, 2, 0, 10, tzinfo=UTC), 5, 0.0, 0.0, 0.0, 0.0, 0.0)
    records, _ = aggregate_daily([b, a], {"LP-01": "S1"})
    assert [(r.date.isoformat(), r.precip_mm) for r in records] == [("2024-03-01", 0.4), ("2024-03-02", 1.0)]


def test_aggregate_timezone_normalized():
    # 20:00 at UTC-5 is 01:00 UTC next day
    local = timezone(timedelta(hours=-5))
    m = TelemetryMessage("LP-01", datetime(2024, 3, 1, 20, 0, tzinfo=local), 1, 0.0, 0.0, 0.0, 0.0, 0.0)
    records, _ = aggregate_daily([m], {"LP-01": "S1"})
    assert records[0].date.isoformat() == "2024-03-02"


def test_aggregate_unknown_device_reported_per_message():
    stray = [TelemetryMessage("ZZ", datetime(2024, 3, 1, h, tzinfo=UTC), 9, 0.0, 0.0, 0.0, 0.0, 0.0) for h in (1, 2)]
    records, warnings = aggregate_daily(day_messages() + stray, {"LP-01": "S1"})
    assert [r.precip_mm for r in records] == [3.0]
    assert len(warnings) == 2
    assert all(isinstance(w, UnknownDevice) and w.device_id == "ZZ" for w in warnings)


def test_no_messages_no_records():
    assert aggregate_daily([], {}) == ([], [])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=10), st.integers(0, 9), st.integers(0, 50))
def test_aggregate_monotone_in_tip_count(tips, idx, bump):
    idx %= len(tips)
    start = datetime(2024, 1, 1, tzinfo=UTC)

    def total(counts):
        msgs = [
            TelemetryMessage("D", start + timedelta(minutes=15 * k), c, 0.0, 0.0, 0.0, 0.0, 0.0)
            for k, c in enumerate(counts)
        ]
        records, _ = aggregate_daily(msgs, {"D": "S"})
        return sum(r.precip_mm for r in records)

    raised = list(tips)
    raised[idx] += bump
    assert total(raised) >= total(tips)
