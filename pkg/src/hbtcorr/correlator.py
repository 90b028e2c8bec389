"""Discrete self-convolutions, renewal inversion and truncated g2 reconstruction.

The pair histogram G and the waiting-time distribution P1 of a stationary
photon stream are linked by the renewal identity

    G = P1 + P1 * G        (* = convolution on the finite delay window)

so G is the sum of all self-convolution orders of P1 and, conversely, P1
can be recovered from G by solving the identity bin by bin.  Truncating the
forward sum at order N yields the order-N reconstruction

    g2_N[k] = (P1 + P2 + ... + PN)[k] / mean_rate_per_bin

which converges monotonically from below to the true g2 as N grows.  The
measured start-stop distribution D1 of a 50:50 two-detector setup relates
to P1 through D1 = sum_n P_n / 2**n, which gives the equivalent
reconstruction g2_N = 2 * (D1 + ... + DN) / mean_rate_per_bin directly from
experimental data.

All convolutions are clipped to the measurement window; that truncation is
the sole source of edge bias in roughly the last coherence time of the
window.  Operations are pure and deterministic.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInputWarning,
    InvalidParameterError,
    NonPhysicalInputError,
    TailNotFlatError,
)
from .types import CorrelationCurve, IntervalHistogram, PhotonStream, ProbabilitySeries

#: per-bin convergence threshold for analytically summed series
SERIES_TOL = 1e-12
#: per-bin tolerance for roundtrip assertions and the physicality check
ROUNDTRIP_TOL = 1e-9

DEFAULT_ORDER = 9


class MeanRateMode(str, enum.Enum):
    """How the mean photon rate entering the normalisation is obtained."""

    GIVEN = "given"
    FROM_COUNTS = "from_counts"
    TAIL_NORMALIZED = "tail_normalized"


@dataclass(frozen=True)
class CorrectionConfig:
    """Order and normalisation policy for the truncated reconstruction."""

    order: int = DEFAULT_ORDER
    mean_rate_mode: MeanRateMode = MeanRateMode.FROM_COUNTS
    mean_rate_per_bin: float | None = None  # used when mode is GIVEN

    def __post_init__(self):
        if self.order < 1:
            raise InvalidParameterError(f"order must be >= 1, got {self.order}")
        if self.mean_rate_mode == MeanRateMode.GIVEN:
            if self.mean_rate_per_bin is None or not self.mean_rate_per_bin > 0:
                raise InvalidParameterError(
                    "mean_rate_per_bin must be > 0 when mean_rate_mode is 'given'"
                )


def _check_same_grid(a: ProbabilitySeries, b: ProbabilitySeries) -> None:
    if abs(a.bin_width - b.bin_width) > 1e-12 * max(a.bin_width, b.bin_width):
        raise InvalidParameterError(
            f"bin widths differ: {a.bin_width} vs {b.bin_width}"
        )


def convolve(a: ProbabilitySeries, b: ProbabilitySeries) -> ProbabilitySeries:
    """Window-truncated convolution: out[k] = sum_j a[j] * b[k-j], k < min(len).

    Bin masses convolve directly (no bin-width factor); the result is
    clipped to the shorter input's window.
    """
    _check_same_grid(a, b)
    n = min(a.values.size, b.values.size)
    out = np.convolve(a.values, b.values)[:n]
    return ProbabilitySeries(a.bin_width, out)


def self_convolution_series(
    p1: ProbabilitySeries, order: int
) -> list[ProbabilitySeries]:
    """[P1, P2, .., P_order] with P_n = P_{n-1} * P1, all on P1's window."""
    if order < 1:
        raise InvalidParameterError(f"order must be >= 1, got {order}")
    terms = [p1]
    for _ in range(order - 1):
        terms.append(convolve(terms[-1], p1))
    return terms


def renewal_invert(g: ProbabilitySeries, tol: float = ROUNDTRIP_TOL) -> ProbabilitySeries:
    """Waiting-time distribution P1 solving G = P1 + P1 * G on the window.

    Solved bin by bin:

        P1[0] = G[0] / (1 + G[0])
        P1[k] = (G[k] - sum_{j<k} P1[j] * G[k-j]) / (1 + G[0])

    Raises :class:`NonPhysicalInputError` if any solved bin falls below
    ``-tol`` (the input cannot be the pair histogram of a point process);
    values in (-tol, 0) are rounded up to zero.
    """
    G = g.values
    if G.max() >= 1.0:
        raise InvalidParameterError("per-bin G values must be < 1")
    n = G.size
    p = np.empty(n)
    denom = 1.0 + G[0]
    p[0] = G[0] / denom
    for k in range(1, n):
        # G[k:0:-1] = [G[k], G[k-1], ..., G[1]] pairs with P1[0..k-1]
        acc = np.dot(p[:k], G[k:0:-1])
        p[k] = (G[k] - acc) / denom
    worst = p.min()
    if worst < -tol:
        raise NonPhysicalInputError(
            f"renewal inversion produced {worst:.3e} < -{tol:.0e}; "
            "input is not a valid pair-interval generator"
        )
    return ProbabilitySeries(g.bin_width, np.clip(p, 0.0, None))


def sum_series_to_convergence(
    p1: ProbabilitySeries, tol: float = SERIES_TOL, max_terms: int = 100_000
) -> np.ndarray:
    """sum_n P_n summed until the latest term is below ``tol`` everywhere."""
    total = np.zeros(p1.values.size)
    term = p1.values.copy()
    for _ in range(max_terms):
        total += term
        if term.max() < tol:
            return total
        term = np.convolve(term, p1.values)[: total.size]
    raise ConvergenceError(
        f"self-convolution series did not converge within {max_terms} terms"
    )


def correction_from_G(
    g_series: ProbabilitySeries, mean_rate_per_bin: float, order: int = DEFAULT_ORDER
) -> CorrelationCurve:
    """Order-N reconstruction of g2 from a per-bin pair histogram G.

    Inverts G to P1, sums the first ``order`` self-convolutions and divides
    by the per-bin mean rate.  The result is pointwise non-decreasing in
    ``order`` and bounded above by the untruncated value.
    """
    if not mean_rate_per_bin > 0:
        raise InvalidParameterError(
            f"mean_rate_per_bin must be > 0, got {mean_rate_per_bin}"
        )
    p1 = renewal_invert(g_series)
    total = np.sum([t.values for t in self_convolution_series(p1, order)], axis=0)
    return CorrelationCurve(g_series.bin_width, total / mean_rate_per_bin)


def histogram_to_D1(h: IntervalHistogram) -> ProbabilitySeries:
    """Start-stop histogram normalised by the number of offered starts."""
    if h.start_count <= 0:
        raise InvalidParameterError("start_count must be positive")
    return ProbabilitySeries(h.bin_width, h.counts / float(h.start_count))


def d1_from_p1(p1: ProbabilitySeries, max_terms: int = 200) -> ProbabilitySeries:
    """Ideal start-stop distribution D1 = sum_n P_n / 2**n of a 50:50 split.

    Terms are added until the latest one is below 1e-12 everywhere; if that
    has not happened within ``max_terms`` terms a
    :class:`ConvergenceError` is raised.
    """
    total = np.zeros(p1.values.size)
    term = p1.values / 2.0
    converged = False
    for _ in range(max_terms):
        total += term
        if term.max() < SERIES_TOL:
            converged = True
            break
        term = np.convolve(term, p1.values)[: total.size] / 2.0
    if not converged:
        raise ConvergenceError(
            f"D1 series did not converge within {max_terms} terms"
        )
    return ProbabilitySeries(p1.bin_width, total)


def _estimate_tail_start(values: np.ndarray, bin_width: float) -> float:
    """Crude coherence-time estimate from the decay of the excess over the tail."""
    tail_level = values[-max(1, values.size // 10):].mean()
    excess = values - tail_level
    if excess[0] <= 0:
        return 0.0
    threshold = excess[0] / np.e**2
    below = np.nonzero(excess <= threshold)[0]
    k = int(below[0]) if below.size else values.size
    return k * bin_width


def correction_from_D1(
    d1: ProbabilitySeries,
    config: CorrectionConfig,
    mean_rate_per_bin: float | None = None,
) -> CorrelationCurve:
    """Order-N reconstruction of g2 from a measured start-stop distribution.

    Computes D_n by self-convolution of D1 and forms
    2 * (D1 + ... + DN) / mean_rate_per_bin.  The factor 2 undoes the 50:50
    routing, so with the rate taken from both detectors' total counts a
    coherent source comes out flat at 1.

    Normalisation follows ``config.mean_rate_mode``:

    * ``given``: use ``config.mean_rate_per_bin``;
    * ``from_counts``: use the ``mean_rate_per_bin`` argument (typically
      from :func:`estimate_mean_rate`);
    * ``tail_normalized``: rescale so the mean over the last 10% of
      converged bins equals 1.  Requires the window to span at least 20
      estimated coherence times, otherwise :class:`TailNotFlatError`.
    """
    terms = self_convolution_series(d1, config.order)
    unnormalised = 2.0 * np.sum([t.values for t in terms], axis=0)

    mode = config.mean_rate_mode
    if mode == MeanRateMode.TAIL_NORMALIZED:
        window = d1.values.size * d1.bin_width
        tau_est = _estimate_tail_start(unnormalised, d1.bin_width)
        if tau_est > 0 and window < 20.0 * tau_est:
            raise TailNotFlatError(
                f"window {window:.3g} ns < 20 x estimated coherence time "
                f"{tau_est:.3g} ns; tail is not flat enough to normalise on"
            )
        converged = _converged_mask(terms)
        idx = np.nonzero(converged)[0]
        if idx.size == 0:
            raise TailNotFlatError("no converged bins available for tail normalisation")
        tail = idx[-max(1, idx.size // 10):]
        scale = unnormalised[tail].mean()
        if scale <= 0:
            raise TailNotFlatError("tail mean is zero; cannot normalise")
        return CorrelationCurve(d1.bin_width, unnormalised / scale)

    if mode == MeanRateMode.GIVEN:
        rate = config.mean_rate_per_bin
    else:  # FROM_COUNTS
        rate = mean_rate_per_bin
    if rate is None or not rate > 0:
        raise InvalidParameterError(
            f"a positive mean_rate_per_bin is required for mode {mode.value!r}"
        )
    return CorrelationCurve(d1.bin_width, unnormalised / rate)


def _converged_mask(terms: list[ProbabilitySeries], rel_tol: float = 1e-3) -> np.ndarray:
    """Bins where the omitted tail beyond the last term is negligible.

    The omitted tail is bounded geometrically: with r the mass ratio of the
    last two terms, tail[k] <= last[k] * r / (1 - r).
    """
    last = terms[-1].values
    if len(terms) == 1:
        r = float(terms[0].total())
    else:
        prev_mass = terms[-2].total()
        r = terms[-1].total() / prev_mass if prev_mass > 0 else 0.0
    r = min(r, 0.999)
    bound = last * (r / (1.0 - r))
    total = np.sum([t.values for t in terms], axis=0)
    return bound <= rel_tol * np.maximum(total, 1e-300)


def estimate_mean_rate(
    streams: PhotonStream | list[PhotonStream], bin_width: float
) -> float:
    """Mean photon rate per bin from detected counts over the run duration.

    Counts from all supplied streams are pooled, so with both detector arms
    passed in this is the combined rate that normalises the factor-2
    reconstruction.  Streams must share one duration.
    """
    if isinstance(streams, PhotonStream):
        streams = [streams]
    if not streams:
        raise InvalidParameterError("at least one stream is required")
    if not bin_width > 0:
        raise InvalidParameterError(f"bin_width must be > 0, got {bin_width}")
    durations = {s.duration for s in streams}
    if len(durations) != 1:
        raise InvalidParameterError(f"streams have differing durations: {durations}")
    duration_ns = streams[0].duration_ns
    if not duration_ns > 0:
        raise InvalidParameterError("stream duration must be positive")
    total = sum(len(s) for s in streams)
    if total == 0:
        warnings.warn(
            "no detected counts; estimated mean rate is zero",
            DegenerateInputWarning,
            stacklevel=2,
        )
        return 0.0
    return total / (duration_ns / bin_width)
