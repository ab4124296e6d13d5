import json
import os

import numpy as np
import pytest

from rangevol.errors import InputError
from rangevol.estimators import RangeSeries, ReturnSeries
from rangevol.inference import confidence_interval
from rangevol.io import (
    ESTIMATE_COLUMNS,
    atomic_write,
    config_hash,
    provenance_header,
    read_estimates,
    read_frame,
    read_range_series,
    read_return_series,
    write_estimates,
    write_range_series,
    write_return_series,
)


def test_config_hash_is_order_free():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash(None)) == 16


def test_provenance_header():
    h = provenance_header(7, {"n": 78}, timestamp="2024-01-01T00:00:00+00:00")
    assert len(h) == 3 and all(line.startswith("# ") for line in h)
    assert "seed=7" in h[0] and config_hash({"n": 78}) in h[0]
    assert h[1] == "# created_at=2024-01-01T00:00:00+00:00"
    assert json.loads(h[2].split("=", 1)[1]) == {"n": 78}


def test_atomic_write_leaves_no_temp(tmp_path):
    f = tmp_path / "x.txt"
    atomic_write(f, "one")
    atomic_write(f, "two")
    assert f.read_text() == "two"
    assert os.listdir(tmp_path) == ["x.txt"]


def test_atomic_write_failure_keeps_old(tmp_path):
    f = tmp_path / "x.txt"
    f.write_text("old")

    class Boom:
        def __str__(self):
            raise RuntimeError

    with pytest.raises(TypeError):
        atomic_write(f, Boom())
    assert f.read_text() == "old"
    assert os.listdir(tmp_path) == ["x.txt"]


def test_range_roundtrip(tmp_path, rng):
    days = []
    for d in range(3):
        w = rng.uniform(0.1, 0.3, 5)
        days.append(RangeSeries(f"{d:05d}", rng.exponential(size=5) * 1e-3, rng.integers(1, 9, 5), w / w.sum()))
    f = tmp_path / "r.csv"
    write_range_series(f, days, provenance_header(1, {}))
    back = read_range_series(f)
    assert [b.day_id for b in back] == ["00000", "00001", "00002"]
    for a, b in zip(days, back):
        np.testing.assert_array_equal(a.ranges, b.ranges)
        np.testing.assert_array_equal(a.counts, b.counts)
        np.testing.assert_array_equal(a.durations, b.durations)


def test_return_roundtrip(tmp_path, rng):
    days = [ReturnSeries("a", rng.standard_normal(4)), ReturnSeries("b", rng.standard_normal(6))]
    f = tmp_path / "r.csv"
    write_return_series(f, days)
    back = read_return_series(f)
    for a, b in zip(days, back):
        np.testing.assert_array_equal(a.returns, b.returns)
        np.testing.assert_allclose(b.durations.sum(), 1.0)


def test_estimates_roundtrip(tmp_path):
    recs = [confidence_interval(1.0 + k, 2.0, 10, 0.4, day_id=f"d{k}", estimator="rrv") for k in range(3)]
    f = tmp_path / "e.csv"
    write_estimates(f, recs)
    frame = read_estimates(f)
    assert tuple(frame.columns) == ESTIMATE_COLUMNS
    assert frame["day_id"].tolist() == ["d0", "d1", "d2"]
    np.testing.assert_array_equal(frame["point"], [1.0, 2.0, 3.0])


@pytest.mark.parametrize(
    "text",
    ["", "# range-vol version=x\n", "day_id,interval_index,value,m,duration\n", "day_id,value\nA,1\n"],
)
def test_bad_inputs_raise(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(InputError):
        read_range_series(f)


def test_missing_file(tmp_path):
    with pytest.raises(InputError, match="no such file"):
        read_frame(tmp_path / "nope.csv")


def test_gap_in_interval_index(tmp_path):
    f = tmp_path / "g.csv"
    f.write_text("day_id,interval_index,value,m,duration\nA,0,0.1,1,0.5\nA,2,0.1,1,0.5\n")
    with pytest.raises(InputError, match="interval_index"):
        read_range_series(f)


def test_invalid_series_values(tmp_path):
    f = tmp_path / "neg.csv"
    f.write_text("day_id,interval_index,value,m,duration\nA,0,-0.1,1,1.0\n")
    with pytest.raises(InputError, match="day A"):
        read_range_series(f)
    f.write_text("day_id,interval_index,value,m,duration\nA,0,0.1,1.5,1.0\n")
    with pytest.raises(InputError):
        read_range_series(f)
