"""Photon-correlation toolkit: HBT simulation and self-convolution g2 correction."""

from .analysis import (
    ErrorSurface,
    FitResult,
    SweepAxis,
    bandwidth_from_spectrum,
    effective_bandwidth,
    error_surface,
    fit_bunching,
    relative_error,
)
from .correlator import (
    CorrectionConfig,
    MeanRateMode,
    convolve,
    correction_from_D1,
    correction_from_G,
    d1_from_p1,
    estimate_mean_rate,
    histogram_to_D1,
    renewal_invert,
    self_convolution_series,
    sum_series_to_convergence,
)
from .errors import (
    ConvergenceError,
    DeadTimeSaturationWarning,
    DegenerateInputWarning,
    InvalidParameterError,
    NoBunchingError,
    NonPhysicalInputError,
    TailNotFlatError,
)
from .pipeline import PipelineResult, run_pipeline
from .simulator import (
    DetectorConfig,
    apply_detector,
    beam_split,
    merge_histograms,
    run_hbt,
    sample_photons,
    simulate_detection,
    simulate_field,
    simulate_intensity,
    start_stop_histogram,
)
from .theory import (
    coherence_time_from_linewidth,
    g1_lorentzian,
    g2_curve,
    g2_model,
    g_theoretical,
    linewidth_from_coherence_time,
)
from .types import (
    CorrelationCurve,
    IntensityTrace,
    IntervalHistogram,
    PhotonStream,
    ProbabilitySeries,
    SourceKind,
    SourceModel,
)

__version__ = "0.1.0"
