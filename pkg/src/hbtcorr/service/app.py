"""FastAPI application wrapping the correlation toolkit.

All endpoints are stateless POSTs carrying full parameter sets, so any
number of clients (CLI runs, notebooks, instrument hosts) can share one
service instance.  Domain validation failures map to HTTP 400; schema
violations to FastAPI's usual 422.
"""

from __future__ import annotations

import warnings

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..analysis import error_surface, fit_bunching
from ..correlator import (
    CorrectionConfig,
    MeanRateMode,
    correction_from_D1,
    histogram_to_D1,
)
from ..errors import (
    ConvergenceError,
    InvalidParameterError,
    NoBunchingError,
    NonPhysicalInputError,
    TailNotFlatError,
)
from ..pipeline import run_pipeline
from ..simulator import simulate_detection, start_stop_histogram
from ..theory import g2_curve
from . import schemas


def _collect_warnings(record: list[warnings.WarningMessage]) -> list[str]:
    return [str(w.message) for w in record]


def create_app() -> FastAPI:
    app = FastAPI(
        title="hbtcorr",
        version=__version__,
        description=(
            "Photon-correlation service: theory curves, HBT Monte Carlo, "
            "self-convolution g2 correction, bunching fits and error surfaces."
        ),
    )

    @app.exception_handler(ValueError)
    async def _domain_error(request: Request, exc: ValueError) -> JSONResponse:
        # InvalidParameterError and friends are ValueErrors raised by the library
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ConvergenceError)
    async def _convergence_error(request: Request, exc: ConvergenceError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/theory", response_model=schemas.TheoryResponse)
    def theory(req: schemas.TheoryRequest) -> schemas.TheoryResponse:
        model = req.source.to_model()
        num_bins = int(round(req.window_ns / req.bin_ns))
        curve = g2_curve(model, req.bin_ns, num_bins)
        return schemas.TheoryResponse(curve=schemas.CurvePayload.from_curve(curve))

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        model = req.source.to_model()
        detector = req.detector.to_config()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            arm1, arm2 = simulate_detection(
                model, detector, req.duration_ns, req.bin_ns, req.seed
            )
            hist = start_stop_histogram(arm1, arm2, req.bin_ns, detector.window)
        streams = None
        if req.include_streams:
            streams = [
                schemas.StreamPayload(
                    timestamps_ps=s.timestamps.tolist(), duration_ps=s.duration
                )
                for s in (arm1, arm2)
            ]
        return schemas.SimulateResponse(
            histogram=schemas.HistogramPayload.from_histogram(hist),
            diagnostics=_collect_warnings(caught),
            streams=streams,
        )

    @app.post("/correct", response_model=schemas.CorrectResponse)
    def correct(req: schemas.CorrectRequest) -> schemas.CorrectResponse:
        hist = req.histogram.to_histogram()
        d1 = histogram_to_D1(hist)
        mode = MeanRateMode(req.mean_rate_mode)
        rate_per_bin = None
        if mode == MeanRateMode.GIVEN:
            if req.mean_rate_per_ns is None:
                raise InvalidParameterError(
                    "mean_rate_per_ns is required when mean_rate_mode is 'given'"
                )
            config = CorrectionConfig(
                order=req.order,
                mean_rate_mode=mode,
                mean_rate_per_bin=req.mean_rate_per_ns * hist.bin_width,
            )
            rate_per_bin = config.mean_rate_per_bin
        else:
            config = CorrectionConfig(order=req.order, mean_rate_mode=mode)
            if mode == MeanRateMode.FROM_COUNTS:
                if req.total_counts is None or req.duration_ns is None:
                    raise InvalidParameterError(
                        "total_counts and duration_ns are required when "
                        "mean_rate_mode is 'from_counts'"
                    )
                rate_per_bin = req.total_counts / (req.duration_ns / hist.bin_width)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            curve = correction_from_D1(d1, config, rate_per_bin)
        return schemas.CorrectResponse(
            curve=schemas.CurvePayload.from_curve(curve),
            mean_rate_per_bin=rate_per_bin,
            diagnostics=_collect_warnings(caught),
        )

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.FitRequest) -> schemas.FitResponse:
        curve = req.curve.to_curve()
        initial = None
        if req.initial_b is not None and req.initial_tau_c_ns is not None:
            initial = (req.initial_b, req.initial_tau_c_ns)
        weights = np.asarray(req.weights) if req.weights is not None else None
        offset = curve.bin_width / 2.0 if req.bin_centers else 0.0
        result = fit_bunching(curve, initial=initial, weights=weights, tau_offset=offset)
        return schemas.FitResponse.from_fit(result)

    @app.post("/error-surface", response_model=schemas.SurfaceResponse)
    def surface(req: schemas.SurfaceRequest) -> schemas.SurfaceResponse:
        model = req.source.to_model()
        values = np.linspace(req.start, req.stop, req.steps)
        num_bins = int(round(req.window_ns / req.bin_ns))
        result = error_surface(
            req.axis,
            values,
            model,
            req.order,
            bin_width=req.bin_ns,
            num_bins=num_bins,
        )
        return schemas.SurfaceResponse.from_surface(result)

    @app.post("/pipeline", response_model=schemas.PipelineResponse)
    def pipeline(req: schemas.PipelineRequest) -> schemas.PipelineResponse:
        model = req.source.to_model()
        detector = req.detector.to_config()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = run_pipeline(
                model,
                detector,
                req.duration_ns,
                req.bin_ns,
                req.order,
                req.seed,
                MeanRateMode(req.mean_rate_mode),
            )
        return schemas.PipelineResponse(
            histogram=schemas.HistogramPayload.from_histogram(result.histogram),
            curve=schemas.CurvePayload.from_curve(result.curve),
            fit=schemas.FitResponse.from_fit(result.fit) if result.fit else None,
            mean_rate_per_bin=result.mean_rate_per_bin,
            diagnostics=_collect_warnings(caught),
        )

    return app


app = create_app()
