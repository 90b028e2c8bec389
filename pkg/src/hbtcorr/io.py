"""File formats: curve/series CSV, histogram CSV + JSON sidecar, photon streams.

Formats
-------
* ProbabilitySeries / CorrelationCurve: CSV with header ``tau_ns,value``,
  one row per bin, delay = k * bin_width, plain decimal point.
* IntervalHistogram: CSV with header ``bin_index,tau_ns,count`` plus a JSON
  sidecar (same stem, ``.json``) carrying bin_width, window, start_count,
  seed and the full parameter provenance.
* PhotonStream: text with one decimal picosecond timestamp per line, or
  binary little-endian unsigned 64-bit timestamps (extension ``.ttag``),
  no header.
* ErrorSurface: CSV matrix whose first row holds the delays and first
  column the swept axis values (corner cell is a label), plus a JSON
  sidecar with all parameters.
* FitResult: a flat JSON record.

All writers go through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .analysis import ErrorSurface, FitResult, SweepAxis
from .errors import InvalidParameterError
from .types import CorrelationCurve, IntervalHistogram, PhotonStream, ProbabilitySeries


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series_csv(path, series: ProbabilitySeries | CorrelationCurve) -> None:
    lines = ["tau_ns,value"]
    for k, v in enumerate(series.values):
        lines.append(f"{_fmt(k * series.bin_width)},{_fmt(v)}")
    atomic_write(Path(path), ("\n".join(lines) + "\n").encode())


def _read_tau_value_csv(path) -> tuple[float, np.ndarray]:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "tau_ns,value":
        raise InvalidParameterError(f"{path}: expected header 'tau_ns,value'")
    taus, values = [], []
    for row in rows[1:]:
        t, v = row.split(",")
        taus.append(float(t))
        values.append(float(v))
    if len(taus) < 1:
        raise InvalidParameterError(f"{path}: no data rows")
    if len(taus) == 1:
        bin_width = taus[0] if taus[0] > 0 else 1.0
    else:
        steps = np.diff(taus)
        bin_width = float(steps[0])
        if np.any(np.abs(steps - bin_width) > 1e-9 * max(bin_width, 1.0)):
            raise InvalidParameterError(f"{path}: delay grid is not uniform")
    return bin_width, np.asarray(values, dtype=float)


def read_series_csv(path) -> ProbabilitySeries:
    bin_width, values = _read_tau_value_csv(path)
    return ProbabilitySeries(bin_width, values)


def read_curve_csv(path) -> CorrelationCurve:
    bin_width, values = _read_tau_value_csv(path)
    return CorrelationCurve(bin_width, values)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_histogram_csv(
    path, hist: IntervalHistogram, seed: int | None = None, parameters: dict | None = None
) -> None:
    """Histogram CSV plus sidecar JSON with metadata and provenance."""
    lines = ["bin_index,tau_ns,count"]
    for k, c in enumerate(hist.counts):
        lines.append(f"{k},{_fmt(k * hist.bin_width)},{int(c)}")
    atomic_write(Path(path), ("\n".join(lines) + "\n").encode())
    meta = {
        "bin_width_ns": hist.bin_width,
        "window_ns": hist.window,
        "start_count": hist.start_count,
        "seed": seed,
        "parameters": parameters or {},
    }
    atomic_write(sidecar_path(path), (json.dumps(meta, indent=2) + "\n").encode())


def read_histogram_csv(path, start_count: int | None = None) -> IntervalHistogram:
    """Read a histogram CSV; metadata comes from the sidecar unless given."""
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "bin_index,tau_ns,count":
        raise InvalidParameterError(
            f"{path}: expected header 'bin_index,tau_ns,count'"
        )
    taus, counts = [], []
    for row in rows[1:]:
        _, t, c = row.split(",")
        taus.append(float(t))
        counts.append(int(c))
    if len(taus) < 2:
        raise InvalidParameterError(f"{path}: need at least two bins")
    bin_width = taus[1] - taus[0]
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    if start_count is None:
        start_count = meta.get("start_count")
    if start_count is None:
        raise InvalidParameterError(
            f"{path}: start_count not given and no sidecar {side.name} found"
        )
    window = meta.get("window_ns", len(counts) * bin_width)
    return IntervalHistogram(
        bin_width=bin_width,
        counts=np.asarray(counts, dtype=np.int64),
        start_count=int(start_count),
        window=float(window),
    )


def write_photons_text(path, stream: PhotonStream) -> None:
    body = "\n".join(str(int(t)) for t in stream.timestamps)
    atomic_write(Path(path), (body + "\n" if body else "").encode())


def read_photons_text(path, duration: int | None = None) -> PhotonStream:
    text = Path(path).read_text().split()
    ts = np.asarray([int(x) for x in text], dtype=np.int64)
    if duration is None:
        duration = int(ts[-1]) + 1 if ts.size else 1
    return PhotonStream(ts, duration)


def write_photons_ttag(path, stream: PhotonStream) -> None:
    data = stream.timestamps.astype("<u8").tobytes()
    atomic_write(Path(path), data)


def read_photons_ttag(path, duration: int | None = None) -> PhotonStream:
    raw = Path(path).read_bytes()
    ts = np.frombuffer(raw, dtype="<u8").astype(np.int64)
    if duration is None:
        duration = int(ts[-1]) + 1 if ts.size else 1
    return PhotonStream(ts, duration)


def read_photons(path, duration: int | None = None) -> PhotonStream:
    """Dispatch on extension: ``.ttag`` binary, anything else text."""
    if str(path).endswith(".ttag"):
        return read_photons_ttag(path, duration)
    return read_photons_text(path, duration)


def write_surface_csv(path, surface: ErrorSurface, parameters: dict | None = None) -> None:
    head = surface.axis_name.value
    lines = [",".join([head] + [_fmt(d) for d in surface.delays])]
    for v, row in zip(surface.axis_values, surface.delta):
        lines.append(",".join([_fmt(v)] + [_fmt(x) for x in row]))
    atomic_write(Path(path), ("\n".join(lines) + "\n").encode())
    meta = {"axis": surface.axis_name.value, "parameters": parameters or {}}
    atomic_write(sidecar_path(path), (json.dumps(meta, indent=2) + "\n").encode())


def read_surface_csv(path) -> ErrorSurface:
    rows = Path(path).read_text().strip().splitlines()
    if len(rows) < 2:
        raise InvalidParameterError(f"{path}: surface needs a header and one row")
    header = rows[0].split(",")
    axis = SweepAxis(header[0])
    delays = np.asarray([float(x) for x in header[1:]])
    axis_values, delta = [], []
    for row in rows[1:]:
        cells = row.split(",")
        axis_values.append(float(cells[0]))
        delta.append([float(x) for x in cells[1:]])
    return ErrorSurface(axis, np.asarray(axis_values), delays, np.asarray(delta))


def write_fit_json(path, fit: FitResult) -> None:
    record = {
        "b": fit.b,
        "tau_c_ns": fit.tau_c,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
    }
    atomic_write(Path(path), (json.dumps(record, indent=2) + "\n").encode())


def read_fit_json(path) -> FitResult:
    record = json.loads(Path(path).read_text())
    return FitResult(
        b=record["b"],
        tau_c=record["tau_c_ns"],
        residual_rms=record["residual_rms"],
        converged=record["converged"],
    )
