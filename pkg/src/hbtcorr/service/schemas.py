"""Pydantic request/response models for the correction service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..analysis import ErrorSurface, FitResult
from ..simulator import DetectorConfig
from ..types import CorrelationCurve, IntervalHistogram, SourceModel


class SourceSpec(BaseModel):
    """Light-source parameters; rates in photons/ns, times in ns."""

    kind: Literal["chaotic", "coherent", "mixed"] = "chaotic"
    rate: float = Field(gt=0, description="mean photon rate, photons/ns")
    tau_c: float | None = Field(default=None, gt=0, description="coherence time, ns")
    fraction: float | None = Field(
        default=None, ge=0, le=1, description="chaotic fraction m; bunching b = m**2"
    )

    def to_model(self) -> SourceModel:
        fraction = self.fraction
        if fraction is None:
            fraction = {"chaotic": 1.0, "coherent": 0.0}.get(self.kind)
            if fraction is None:
                raise ValueError("kind 'mixed' requires an explicit fraction")
        return SourceModel(
            mean_rate=self.rate,
            coherence_time=self.tau_c,
            chaotic_fraction=fraction,
            kind=self.kind,
        )


class DetectorSpec(BaseModel):
    """Detector chain parameters; defaults describe an ideal detector."""

    efficiency: float = Field(default=1.0, ge=0, le=1)
    dead_time_ns: float = Field(default=0.0, ge=0)
    dark_rate_hz: float = Field(default=0.0, ge=0)
    resolution_ps: int = Field(default=1, ge=1)
    afterpulse_prob: float = Field(default=0.0, ge=0, le=1)
    afterpulse_tau_ns: float | None = Field(default=None, gt=0)
    window_ns: float = Field(default=100.0, gt=0)

    def to_config(self) -> DetectorConfig:
        return DetectorConfig(
            efficiency=self.efficiency,
            dead_time=self.dead_time_ns,
            dark_rate=self.dark_rate_hz,
            resolution=self.resolution_ps,
            afterpulse_prob=self.afterpulse_prob,
            afterpulse_tau=self.afterpulse_tau_ns,
            window=self.window_ns,
        )


class CurvePayload(BaseModel):
    bin_ns: float = Field(gt=0)
    values: list[float]

    @classmethod
    def from_curve(cls, curve: CorrelationCurve) -> "CurvePayload":
        return cls(bin_ns=curve.bin_width, values=curve.values.tolist())

    def to_curve(self) -> CorrelationCurve:
        return CorrelationCurve(self.bin_ns, self.values)


class HistogramPayload(BaseModel):
    bin_ns: float = Field(gt=0)
    window_ns: float = Field(gt=0)
    start_count: int = Field(ge=0)
    counts: list[int]

    @classmethod
    def from_histogram(cls, hist: IntervalHistogram) -> "HistogramPayload":
        return cls(
            bin_ns=hist.bin_width,
            window_ns=hist.window,
            start_count=hist.start_count,
            counts=hist.counts.tolist(),
        )

    def to_histogram(self) -> IntervalHistogram:
        return IntervalHistogram(
            bin_width=self.bin_ns,
            counts=self.counts,
            start_count=self.start_count,
            window=self.window_ns,
        )


class StreamPayload(BaseModel):
    timestamps_ps: list[int]
    duration_ps: int


class TheoryRequest(BaseModel):
    source: SourceSpec
    bin_ns: float = Field(gt=0)
    window_ns: float = Field(gt=0)


class TheoryResponse(BaseModel):
    curve: CurvePayload


class SimulateRequest(BaseModel):
    source: SourceSpec
    detector: DetectorSpec = DetectorSpec()
    duration_ns: float = Field(gt=0)
    bin_ns: float = Field(gt=0)
    seed: int
    include_streams: bool = False


class SimulateResponse(BaseModel):
    histogram: HistogramPayload
    diagnostics: list[str] = []
    streams: list[StreamPayload] | None = None


class CorrectRequest(BaseModel):
    histogram: HistogramPayload
    order: int = Field(default=9, ge=1)
    mean_rate_mode: Literal["given", "from_counts", "tail_normalized"] = "from_counts"
    mean_rate_per_ns: float | None = Field(default=None, gt=0)
    total_counts: int | None = Field(default=None, ge=0)
    duration_ns: float | None = Field(default=None, gt=0)


class CorrectResponse(BaseModel):
    curve: CurvePayload
    mean_rate_per_bin: float | None
    diagnostics: list[str] = []


class FitRequest(BaseModel):
    curve: CurvePayload
    initial_b: float | None = None
    initial_tau_c_ns: float | None = None
    bin_centers: bool = False
    weights: list[float] | None = None


class FitResponse(BaseModel):
    b: float
    tau_c_ns: float
    residual_rms: float
    converged: bool

    @classmethod
    def from_fit(cls, fit: FitResult) -> "FitResponse":
        return cls(
            b=fit.b,
            tau_c_ns=fit.tau_c,
            residual_rms=fit.residual_rms,
            converged=fit.converged,
        )


class SurfaceRequest(BaseModel):
    axis: Literal["intensity", "coherence_time"]
    start: float = Field(gt=0)
    stop: float = Field(gt=0)
    steps: int = Field(ge=1)
    source: SourceSpec
    order: int = Field(default=9, ge=1)
    bin_ns: float = Field(gt=0)
    window_ns: float = Field(gt=0)


class SurfaceResponse(BaseModel):
    axis: str
    axis_values: list[float]
    delays_ns: list[float]
    delta_percent: list[list[float]]

    @classmethod
    def from_surface(cls, surface: ErrorSurface) -> "SurfaceResponse":
        return cls(
            axis=surface.axis_name.value,
            axis_values=surface.axis_values.tolist(),
            delays_ns=surface.delays.tolist(),
            delta_percent=surface.delta.tolist(),
        )


class PipelineRequest(BaseModel):
    source: SourceSpec
    detector: DetectorSpec = DetectorSpec()
    duration_ns: float = Field(gt=0)
    bin_ns: float = Field(gt=0)
    order: int = Field(default=9, ge=1)
    seed: int
    mean_rate_mode: Literal["from_counts", "tail_normalized"] = "from_counts"


class PipelineResponse(BaseModel):
    histogram: HistogramPayload
    curve: CurvePayload
    fit: FitResponse | None
    mean_rate_per_bin: float
    diagnostics: list[str] = []


class HealthResponse(BaseModel):
    status: str
    version: str
