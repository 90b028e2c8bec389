import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hbtcorr import (
    CorrelationCurve,
    IntervalHistogram,
    InvalidParameterError,
    PhotonStream,
    ProbabilitySeries,
    SourceModel,
    error_surface,
)
from hbtcorr.analysis import FitResult
from hbtcorr import io


def test_series_csv_roundtrip(tmp_path):
    series = ProbabilitySeries(0.1, np.array([0.0, 0.25, 0.1, 0.05]))
    path = tmp_path / "series.csv"
    io.write_series_csv(path, series)
    text = path.read_text().splitlines()
    assert text[0] == "tau_ns,value"
    assert text[1] == "0.0,0.0"
    back = io.read_series_csv(path)
    assert back.bin_width == 0.1
    assert_allclose(back.values, series.values)


def test_curve_csv_roundtrip(tmp_path):
    curve = CorrelationCurve(0.05, np.array([2.0, 1.7, 1.3, 1.0]))
    path = tmp_path / "curve.csv"
    io.write_series_csv(path, curve)
    back = io.read_curve_csv(path)
    assert back.bin_width == 0.05
    assert_allclose(back.values, curve.values)


def test_series_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,val\n0,1\n")
    with pytest.raises(InvalidParameterError):
        io.read_series_csv(path)


def test_series_csv_rejects_nonuniform_grid(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("tau_ns,value\n0.0,0.1\n0.1,0.1\n0.35,0.1\n")
    with pytest.raises(InvalidParameterError):
        io.read_series_csv(path)


def test_histogram_roundtrip_with_sidecar(tmp_path):
    hist = IntervalHistogram(0.1, np.array([4, 2, 0, 1]), start_count=50, window=0.4)
    path = tmp_path / "hist.csv"
    io.write_histogram_csv(path, hist, seed=7, parameters={"rate": 0.04})
    assert path.read_text().splitlines()[0] == "bin_index,tau_ns,count"
    meta = json.loads((tmp_path / "hist.json").read_text())
    assert meta["start_count"] == 50
    assert meta["seed"] == 7
    assert meta["parameters"]["rate"] == 0.04
    back = io.read_histogram_csv(path)
    assert back.start_count == 50
    assert back.window == 0.4
    assert_array_equal(back.counts, hist.counts)


def test_histogram_read_needs_start_count(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("bin_index,tau_ns,count\n0,0.0,1\n1,0.1,2\n")
    with pytest.raises(InvalidParameterError):
        io.read_histogram_csv(path)
    back = io.read_histogram_csv(path, start_count=10)
    assert back.start_count == 10


def test_photons_text_roundtrip(tmp_path):
    stream = PhotonStream(np.array([0, 65, 130, 10_000], dtype=np.int64), 20_000)
    path = tmp_path / "photons.txt"
    io.write_photons_text(path, stream)
    assert path.read_text() == "0\n65\n130\n10000\n"
    back = io.read_photons_text(path, duration=20_000)
    assert_array_equal(back.timestamps, stream.timestamps)


def test_photons_ttag_roundtrip(tmp_path):
    ts = np.array([1, 2**40, 2**40 + 65], dtype=np.int64)
    stream = PhotonStream(ts, 2**41)
    path = tmp_path / "photons.ttag"
    io.write_photons_ttag(path, stream)
    assert path.stat().st_size == 3 * 8  # packed little-endian u64
    back = io.read_photons(path, duration=2**41)
    assert_array_equal(back.timestamps, ts)


def test_photons_empty(tmp_path):
    stream = PhotonStream(np.empty(0, dtype=np.int64), 100)
    io.write_photons_text(tmp_path / "e.txt", stream)
    io.write_photons_ttag(tmp_path / "e.ttag", stream)
    assert len(io.read_photons(tmp_path / "e.txt")) == 0
    assert len(io.read_photons(tmp_path / "e.ttag")) == 0


def test_surface_roundtrip(tmp_path):
    surf = error_surface(
        "intensity", [0.03, 0.05], SourceModel.chaotic(0.04, 1.0), 5,
        bin_width=0.1, num_bins=50,
    )
    path = tmp_path / "surface.csv"
    io.write_surface_csv(path, surf, parameters={"order": 5})
    rows = path.read_text().splitlines()
    assert rows[0].startswith("intensity,0.0,")
    assert len(rows) == 3
    back = io.read_surface_csv(path)
    assert_allclose(back.axis_values, surf.axis_values)
    assert_allclose(back.delays, surf.delays)
    assert_allclose(back.delta, surf.delta)
    meta = json.loads((tmp_path / "surface.json").read_text())
    assert meta["axis"] == "intensity"


def test_fit_json_roundtrip(tmp_path):
    fit = FitResult(b=0.524, tau_c=0.651, residual_rms=1e-12, converged=True)
    path = tmp_path / "fit.json"
    io.write_fit_json(path, fit)
    back = io.read_fit_json(path)
    assert back == fit


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write(tmp_path / "x.txt", b"data")
    assert (tmp_path / "x.txt").read_bytes() == b"data"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
