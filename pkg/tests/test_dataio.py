from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rainflag import dataio
from rainflag.dataio import DailyRecord, Station
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

D0 = date(2024, 1, 1)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def series(sid, values, start=D0):
    return [DailyRecord(sid, start + timedelta(days=k), v) for k, v in enumerate(values)]


def stations(*ids, alts=None):
    alts = alts or [1000.0 * (i + 1) for i in range(len(ids))]
    return [Station(sid, sid, -16.5 + 0.1 * i, -68.1, a) for i, (sid, a) in enumerate(zip(ids, alts))]


# loading

def test_load_41_stations(tmp_path):
    rows = "".join(f"S{i:02d},Station {i},-16.{i:02d},-68.{i:02d},{3000 + i}\n" for i in range(41))
    path = write(tmp_path, "st.csv", "station_id,name,latitude_deg,longitude_deg,altitude_m\n" + rows)
    loaded = dataio.load_stations(path)
    assert len(loaded) == 41
    assert loaded[3] == Station("S03", "Station 3", -16.03, -68.03, 3003.0)


def test_load_stations_empty(tmp_path):
    path = write(tmp_path, "st.csv", "station_id,name,latitude_deg,longitude_deg,altitude_m\n")
    assert dataio.load_stations(path) == []


def test_load_stations_errors(tmp_path):
    header = "station_id,name,latitude_deg,longitude_deg,altitude_m\n"
    with pytest.raises(RangeViolation):
        dataio.load_stations(write(tmp_path, "a.csv", header + "S1,x,91,0,0\n"))
    with pytest.raises(RangeViolation):
        dataio.load_stations(write(tmp_path, "b.csv", header + "S1,x,0,-181,0\n"))
    with pytest.raises(DuplicateStation):
        dataio.load_stations(write(tmp_path, "c.csv", header + "S1,x,0,0,0\nS1,y,1,1,1\n"))
    with pytest.raises(MalformedRow) as err:
        dataio.load_stations(write(tmp_path, "d.csv", header + "S1,x,0,0,0\nS2,y,north,1,1\n"))
    assert err.value.row == 3
    with pytest.raises(MalformedRow):
        dataio.load_stations(write(tmp_path, "e.csv", header + "S1,x,0,0\n"))
    with pytest.raises(MalformedRow):
        dataio.load_stations(write(tmp_path, "f.csv", "id,name\n"))


def test_load_records_cleans_values(tmp_path):
    text = (
        "station_id,date,precip_mm\n"
        'S1,2024-01-01," 12,5 mm"\n'
        "S1,2024-01-02,\n"
        "S1,2024-01-03,3.2mm\n"
        'S1,2024-01-04,"1,234.5"\n'
        "S1,2024-01-05, 7 MM \n"
    )
    recs = dataio.load_records(write(tmp_path, "r.csv", text))
    assert [r.precip_mm for r in recs] == [12.5, None, 3.2, 1234.5, 7.0]
    assert recs[0].date == D0


@pytest.mark.parametrize(
    "raw,value",
    [(" 12,5 mm", 12.5), ("", None), ("  ", None), ("0", 0.0), ("1.234,5", 1234.5), ("1 024", 1024.0)],
)
def test_clean_precip_value(raw, value):
    assert dataio.clean_precip_value(raw) == value


def test_load_records_errors(tmp_path):
    header = "station_id,date,precip_mm\n"
    with pytest.raises(NegativePrecip):
        dataio.load_records(write(tmp_path, "a.csv", header + "S1,2024-01-01,-1\n"))
    with pytest.raises(DuplicateRecord):
        dataio.load_records(write(tmp_path, "b.csv", header + "S1,2024-01-01,1\nS1,2024-01-01,2\n"))
    with pytest.raises(MalformedRow):
        dataio.load_records(write(tmp_path, "c.csv", header + "S1,01/02/2024,1\n"))
    with pytest.raises(MalformedRow):
        dataio.load_records(write(tmp_path, "d.csv", header + "S1,2024-01-01,lots\n"))


# sparse stations

def ten_day_fixture():
    # A complete; B missing 3 of 10 days (30%); C missing 1 of 10 (one day simply absent)
    a = series("A", [1.0] * 10)
    b = series("B", [1.0, None, 2.0, None, 3.0, 4.0, None, 5.0, 6.0, 7.0])
    c = [r for r in series("C", [2.0] * 10) if r.date != D0 + timedelta(days=4)]
    return a + b + c, stations("A", "B", "C")


def test_drop_sparse_counts_missing_fraction():
    records, sts = ten_day_fixture()
    # hand count: A 0/10, B 3/10, C 1/10 missing
    kept_records, kept = dataio.drop_sparse_stations(records, sts, 0.20)
    assert [s.station_id for s in kept] == ["A", "C"]
    assert {r.station_id for r in kept_records} == {"A", "C"}


def test_drop_sparse_thresholds():
    records, sts = ten_day_fixture()
    assert len(dataio.drop_sparse_stations(records, sts, 1.0)[1]) == 3
    assert [s.station_id for s in dataio.drop_sparse_stations(records, sts, 0.0)[1]] == ["A"]
    assert len(dataio.drop_sparse_stations(records, sts, 0.30)[1]) == 3


def test_drop_sparse_all_dropped():
    records = series("A", [None, 1.0])
    with pytest.raises(EmptyDataset):
        dataio.drop_sparse_stations(records, stations("A"), 0.0)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=5))
def test_drop_sparse_monotone(thresholds):
    records, sts = ten_day_fixture()

    def kept(t):
        try:
            return {s.station_id for s in dataio.drop_sparse_stations(records, sts, t)[1]}
        except EmptyDataset:
            return set()

    ts = sorted(thresholds)
    for lo, hi in zip(ts, ts[1:]):
        assert kept(lo) <= kept(hi)


# interpolation

def values(records, sid):
    return [r.precip_mm for r in records if r.station_id == sid]


@pytest.mark.parametrize(
    "raw,filled",
    [
        ([1.0, None, 3.0], [1.0, 2.0, 3.0]),
        ([None, 4.0], [4.0, 4.0]),
        ([1.0, None, None, 4.0], [1.0, 2.0, 3.0, 4.0]),
        ([None, 2.0, None, None], [2.0, 2.0, 2.0, 2.0]),
    ],
)
def test_interpolate(raw, filled):
    assert values(dataio.interpolate_missing(series("A", raw)), "A") == pytest.approx(filled, abs=1e-12)


def test_interpolate_linear_oracle_on_long_gap():
    raw = [2.0, None, None, None, None, 12.0]
    # independent line through (0, 2) and (5, 12)
    oracle = [2.0 + (12.0 - 2.0) * k / 5 for k in range(6)]
    assert values(dataio.interpolate_missing(series("A", raw)), "A") == pytest.approx(oracle, rel=1e-12)


def test_interpolate_fills_absent_days_over_full_span():
    records = series("A", [1.0, 2.0, 3.0, 4.0]) + [DailyRecord("B", D0 + timedelta(days=1), 5.0)]
    filled = dataio.interpolate_missing(records)
    assert values(filled, "B") == [5.0, 5.0, 5.0, 5.0]
    assert all(r.precip_mm is not None for r in filled)


def test_interpolate_all_missing():
    with pytest.raises(AllMissingStation):
        dataio.interpolate_missing(series("A", [1.0, 2.0]) + series("B", [None, None]))


@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=30))
def test_interpolate_identity_on_complete_series(vals):
    assert values(dataio.interpolate_missing(series("A", vals)), "A") == vals


# samples

def test_make_samples_count_and_targets():
    recs = series("A", [float(k) for k in range(1, 11)]) + series("B", [10.0 * k for k in range(1, 11)])
    samples = dataio.make_samples(recs, stations("A", "B"), 7)
    assert len(samples) == 3
    assert samples.feature_dim == 8
    assert samples.targets[:, 0].tolist() == [8.0, 9.0, 10.0]
    assert samples.features[0, 0, :7].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    assert samples.dates == (D0 + timedelta(days=6), D0 + timedelta(days=7), D0 + timedelta(days=8))
    assert samples.node_order == ("A", "B")


def test_make_samples_constant_rainfall_window_one():
    recs = series("A", [2.5] * 5) + series("B", [2.5] * 5)
    samples = dataio.make_samples(recs, stations("A", "B", alts=[1000.0, 3000.0]), 1)
    # altitude z-scores of two stations are -1 and +1
    for k in range(len(samples)):
        assert samples.features[k].tolist() == [[2.5, -1.0], [2.5, 1.0]]


def test_make_samples_span_too_short():
    with pytest.raises(SpanTooShort):
        dataio.make_samples(series("A", [1.0] * 7), stations("A"), 7)


def test_make_samples_rejects_missing():
    with pytest.raises(SpanTooShort):
        dataio.make_samples(series("A", [1.0, None] * 5), stations("A"), 3)


def test_no_leakage_between_window_and_target():
    recs = series("A", [float(k) for k in range(20)])
    samples = dataio.make_samples(recs, stations("A"), 5)
    for k in range(len(samples)):
        window = samples.features[k, 0, :5]
        # day value equals its index, so the target is strictly after the window
        assert samples.targets[k, 0] == window.max() + 1
        assert samples.targets[k, 0] not in window


# split

@pytest.mark.parametrize("n,sizes", [(100, (70, 20, 10)), (10, (7, 2, 1)), (193, (136, 38, 19))])
def test_split_sizes(n, sizes):
    assert dataio.split_sizes(n) == sizes


def test_split_empty():
    with pytest.raises(EmptySplit):
        dataio.split_sizes(2)


def test_split_chronological_order():
    recs = series("A", [float(k) for k in range(40)])
    samples = dataio.make_samples(recs, stations("A"), 3)
    train, val, test = dataio.split_chronological(samples)
    assert len(train) + len(val) + len(test) == len(samples)
    assert max(train.dates) < min(val.dates)
    assert max(val.dates) < min(test.dates)
    assert list(train.dates + val.dates + test.dates) == list(samples.dates)


# standardization

def fake_samples(features):
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    return dataio.SampleSet(
        tuple(D0 + timedelta(days=k) for k in range(n)),
        tuple(f"S{i}" for i in range(features.shape[1])),
        features,
        np.zeros(features.shape[:2]),
    )


def test_standardize_constant_column():
    rng = np.random.default_rng(0)
    feats = rng.normal(3.0, 2.0, size=(12, 4, 3))
    feats[..., 1] = 5.0
    s = fake_samples(feats)
    z = dataio.standardize(s, fit_on=s)
    assert np.all(z.features[..., 1] == 0.0)


def test_standardize_moments_and_inverse():
    rng = np.random.default_rng(1)
    s = fake_samples(rng.normal(10.0, 4.0, size=(30, 5, 4)))
    train, _, _ = dataio.split_chronological(s)
    z_train = dataio.standardize(train, fit_on=train)
    flat = z_train.features.reshape(-1, 4)
    assert np.allclose(flat.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(flat.std(axis=0), 1.0, atol=1e-9)
    z_all = dataio.standardize(s, fit_on=train)
    assert np.allclose(dataio.inverse_standardize(z_all).features, s.features, atol=1e-9)
    assert np.array_equal(z_all.targets, s.targets)
