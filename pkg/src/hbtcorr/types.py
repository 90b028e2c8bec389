"""Data carriers shared by the theory, correlator, simulator and analysis modules.

Unit conventions
----------------
* delays, bin widths, coherence times, trace steps: nanoseconds
* photon rates: photons per nanosecond
* photon timestamps and stream durations: integer picoseconds
* probability series values: probability mass per bin (dimensionless)

Delay grids are one-sided (tau >= 0); even symmetry supplies negative
delays when plotting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

_EPS = 1e-9


class SourceKind(str, enum.Enum):
    CHAOTIC = "chaotic"
    COHERENT = "coherent"
    MIXED = "mixed"


@dataclass(frozen=True)
class SourceModel:
    """Analytic description of the light source.

    ``chaotic_fraction`` (m) sets the statistical mixture between a constant
    coherent background and a fully chaotic component, so the intensity is
    I(t) = mean_rate * [(1 - m) + m * u(t)] with u the normalised chaotic
    intensity.  The bunching amplitude is b = m**2 and
    g2(tau) = 1 + m**2 * exp(-2|tau|/coherence_time).
    """

    mean_rate: float  # photons/ns
    coherence_time: float | None = None  # ns, required whenever m > 0
    chaotic_fraction: float = 1.0  # m in [0, 1]
    kind: SourceKind = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.mean_rate > 0:
            raise InvalidParameterError(f"mean_rate must be > 0, got {self.mean_rate}")
        m = self.chaotic_fraction
        if not 0.0 <= m <= 1.0:
            raise InvalidParameterError(f"chaotic_fraction must be in [0, 1], got {m}")
        if m > 0 and (self.coherence_time is None or not self.coherence_time > 0):
            raise InvalidParameterError(
                "coherence_time must be > 0 whenever chaotic_fraction > 0"
            )
        derived = (
            SourceKind.COHERENT if m == 0.0
            else SourceKind.CHAOTIC if m == 1.0
            else SourceKind.MIXED
        )
        if self.kind is None:
            object.__setattr__(self, "kind", derived)
        elif SourceKind(self.kind) != derived:
            raise InvalidParameterError(
                f"kind={self.kind!r} inconsistent with chaotic_fraction={m}"
            )

    @property
    def bunching_amplitude(self) -> float:
        """b = m**2, the excess of g2 at zero delay."""
        return self.chaotic_fraction**2

    @classmethod
    def chaotic(cls, mean_rate: float, coherence_time: float) -> "SourceModel":
        return cls(mean_rate, coherence_time, 1.0)

    @classmethod
    def coherent(cls, mean_rate: float) -> "SourceModel":
        return cls(mean_rate, None, 0.0)

    @classmethod
    def mixed(
        cls, mean_rate: float, coherence_time: float, chaotic_fraction: float
    ) -> "SourceModel":
        return cls(mean_rate, coherence_time, chaotic_fraction)


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise InvalidParameterError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


@dataclass
class ProbabilitySeries:
    """Per-bin discrete distribution: values[k] is the mass in [k*dt, (k+1)*dt).

    Houses waiting-time distributions (which must sum to <= 1) as well as
    per-bin pair histograms G, whose total is not bounded by 1; only the
    per-bin bound [0, 1] is enforced here.
    """

    bin_width: float  # ns
    values: np.ndarray

    def __post_init__(self):
        if not self.bin_width > 0:
            raise InvalidParameterError(f"bin_width must be > 0, got {self.bin_width}")
        arr = _as_float_array(self.values, "values")
        if arr.min() < -_EPS or arr.max() > 1.0 + _EPS:
            raise InvalidParameterError("per-bin values must lie in [0, 1]")
        # tolerate roundoff just below zero
        self.values = np.clip(arr, 0.0, None)

    def __len__(self) -> int:
        return self.values.size

    @property
    def taus(self) -> np.ndarray:
        """Left bin edges in ns."""
        return np.arange(self.values.size) * self.bin_width

    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class CorrelationCurve:
    """g2(tau) samples on a uniform one-sided delay grid."""

    bin_width: float  # ns
    values: np.ndarray

    def __post_init__(self):
        if not self.bin_width > 0:
            raise InvalidParameterError(f"bin_width must be > 0, got {self.bin_width}")
        arr = _as_float_array(self.values, "values")
        if arr.min() < -_EPS:
            raise InvalidParameterError("correlation values must be non-negative")
        self.values = np.clip(arr, 0.0, None)

    def __len__(self) -> int:
        return self.values.size

    @property
    def taus(self) -> np.ndarray:
        return np.arange(self.values.size) * self.bin_width


@dataclass
class IntervalHistogram:
    """Raw start-stop photon-pair interval counts.

    ``start_count`` is the number of start events offered, including starts
    whose stop fell outside the window; sum(counts) can therefore be smaller.
    """

    bin_width: float  # ns
    counts: np.ndarray  # non-negative integers
    start_count: int
    window: float  # ns

    def __post_init__(self):
        if not self.bin_width > 0:
            raise InvalidParameterError(f"bin_width must be > 0, got {self.bin_width}")
        arr = np.asarray(self.counts)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidParameterError("counts must be a non-empty 1-d sequence")
        if np.any(arr < 0):
            raise InvalidParameterError("counts must be non-negative")
        self.counts = arr.astype(np.int64)
        if self.start_count < 0:
            raise InvalidParameterError("start_count must be non-negative")
        if int(self.counts.sum()) > self.start_count:
            raise InvalidParameterError("sum(counts) cannot exceed start_count")
        if abs(self.counts.size * self.bin_width - self.window) > self.bin_width:
            raise InvalidParameterError(
                "counts length times bin_width must equal window to within one bin"
            )

    @property
    def taus(self) -> np.ndarray:
        return np.arange(self.counts.size) * self.bin_width


@dataclass
class PhotonStream:
    """Sorted photon detection timestamps in integer picoseconds."""

    timestamps: np.ndarray  # int64 ps, non-decreasing
    duration: int  # ps

    def __post_init__(self):
        arr = np.asarray(self.timestamps)
        if arr.ndim != 1:
            raise InvalidParameterError("timestamps must be one-dimensional")
        self.timestamps = arr.astype(np.int64)
        self.duration = int(self.duration)
        if self.duration <= 0:
            raise InvalidParameterError("duration must be positive")
        if self.timestamps.size:
            if np.any(np.diff(self.timestamps) < 0):
                raise InvalidParameterError("timestamps must be non-decreasing")
            if self.timestamps[0] < 0 or self.timestamps[-1] >= self.duration:
                raise InvalidParameterError("timestamps must lie in [0, duration)")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def duration_ns(self) -> float:
        return self.duration * 1e-3


@dataclass
class IntensityTrace:
    """Sampled instantaneous intensity in photons/ns on a uniform grid."""

    dt: float  # ns
    samples: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        arr = _as_float_array(self.samples, "samples")
        if arr.min() < 0:
            raise InvalidParameterError("intensity samples must be non-negative")
        self.samples = arr

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Trace span in ns."""
        return self.samples.size * self.dt
