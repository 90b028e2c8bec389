"""Relative-error analysis, bunching-model fitting and spectral utilities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import welch

from .correlator import correction_from_G
from .errors import InvalidParameterError, NoBunchingError
from .theory import g2_model, g_theoretical
from .types import CorrelationCurve, IntensityTrace, SourceModel


class SweepAxis(str, enum.Enum):
    INTENSITY = "intensity"
    COHERENCE_TIME = "coherence_time"


@dataclass
class ErrorSurface:
    """Relative error (percent) of the truncated reconstruction on a 2-d grid.

    ``delta[i][k]`` is the error at axis value ``axis_values[i]`` and delay
    ``delays[k]``.
    """

    axis_name: SweepAxis
    axis_values: np.ndarray
    delays: np.ndarray  # ns
    delta: np.ndarray  # percent

    def __post_init__(self):
        self.axis_values = np.asarray(self.axis_values, dtype=float)
        self.delays = np.asarray(self.delays, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        if self.delta.shape != (self.axis_values.size, self.delays.size):
            raise InvalidParameterError(
                f"delta shape {self.delta.shape} does not match axes "
                f"({self.axis_values.size}, {self.delays.size})"
            )
        if self.delta.min() < 0:
            raise InvalidParameterError("relative errors must be non-negative")


@dataclass
class FitResult:
    """Least-squares estimate of the bunching model 1 + b*exp(-2 tau/tau_c)."""

    b: float
    tau_c: float  # ns
    residual_rms: float
    converged: bool

    def __post_init__(self):
        if self.b < 0:
            raise InvalidParameterError("bunching amplitude must be >= 0")
        if self.converged and not self.tau_c > 0:
            raise InvalidParameterError("tau_c must be > 0 for a converged fit")


def relative_error(
    estimate: CorrelationCurve, truth: CorrelationCurve
) -> np.ndarray:
    """Per-bin relative error |estimate - truth| / truth in percent.

    Grids must match; the truth curve must stay at or above 1, which every
    analytic bunching model satisfies.
    """
    if abs(estimate.bin_width - truth.bin_width) > 1e-12 * truth.bin_width:
        raise InvalidParameterError("curves are on different delay grids")
    if len(estimate) != len(truth):
        raise InvalidParameterError("curves have different lengths")
    t = truth.values
    if t.min() < 1.0 - 1e-9:
        raise InvalidParameterError("truth curve must satisfy g2 >= 1 everywhere")
    return np.abs(estimate.values - t) / t * 100.0


def error_surface(
    axis: SweepAxis | str,
    axis_values,
    model: SourceModel,
    order: int = 9,
    *,
    bin_width: float,
    num_bins: int,
) -> ErrorSurface:
    """Relative error of the order-N reconstruction across a parameter sweep.

    For each axis value the swept field of ``model`` is replaced, the
    theoretical per-bin pair histogram is inverted and reconstructed at the
    given order, and the error against the analytic g2 is recorded.  Sweep
    points are independent; evaluation order does not affect the result.
    """
    axis = SweepAxis(axis)
    axis_values = np.asarray(axis_values, dtype=float)
    if axis_values.ndim != 1 or axis_values.size == 0:
        raise InvalidParameterError("axis_values must be a non-empty 1-d sequence")
    rows = np.empty((axis_values.size, num_bins))
    for i, v in enumerate(axis_values):
        if axis is SweepAxis.INTENSITY:
            m = replace(model, mean_rate=float(v))
        else:
            m = replace(model, coherence_time=float(v))
        g = g_theoretical(m, bin_width, num_bins)
        est = correction_from_G(g, m.mean_rate * bin_width, order)
        truth = CorrelationCurve(
            bin_width, np.asarray(g2_model(est.taus, m), dtype=float)
        )
        rows[i] = relative_error(est, truth)
    delays = np.arange(num_bins) * bin_width
    return ErrorSurface(axis, axis_values, delays, rows)


def _bunching_residuals(taus, y, w, b, tau_c):
    pred = 1.0 + b * np.exp(-2.0 * taus / tau_c)
    return (y - pred) * w


def fit_bunching(
    curve: CorrelationCurve,
    initial: tuple[float, float] | None = None,
    weights=None,
    max_iter: int = 200,
    tau_offset: float = 0.0,
) -> FitResult:
    """Damped Gauss-Newton fit of 1 + b*exp(-2 tau/tau_c) to a g2 curve.

    Uses the analytic Jacobian; convergence when the relative parameter
    step drops below 1e-10.  ``initial`` overrides the default guesses
    b0 = curve[0] - 1 and tau_c0 = delay where the excess has fallen to
    b0/e^2.  ``weights`` (same length as the curve) enable Poisson-style
    weighting of noisy histogram-derived curves.

    Point-sampled curves are evaluated at the left bin edges k*bin_width
    (the grid convention).  Curves that come from interval histograms hold
    bin averages instead; passing ``tau_offset=bin_width/2`` evaluates the
    model at bin centres, which removes the first-order smearing bias.

    A noise-only curve lets the amplitude diverge while the decay collapses
    below the grid, so after the fit the amplitude is tested against the
    flat model: if the sum-of-squares improvement is within what noise
    alone produces (about the 99.9% level of a 2-parameter fit), the
    amplitude is reported as 0.

    Raises :class:`NoBunchingError` for curves with no excess above 1 and
    :class:`InvalidParameterError` when fewer than 10 bins or less than
    three estimated coherence times are covered.  A fit that exhausts
    ``max_iter`` is returned with ``converged=False``.
    """
    y = curve.values
    taus = curve.taus + tau_offset
    excess = y - 1.0
    if excess.max() < 1e-3:
        raise NoBunchingError("curve maximum is below 1 + 1e-3; nothing to fit")

    if initial is not None:
        b0, tau0 = initial
    else:
        b0 = max(excess[0], 1e-3)
        below = np.nonzero(excess <= b0 / np.e**2)[0]
        k0 = int(below[0]) if below.size else len(y)
        tau0 = max(k0, 1) * curve.bin_width
    if len(y) < 10:
        raise InvalidParameterError("need at least 10 bins to fit")
    if taus[-1] < 3.0 * tau0:
        raise InvalidParameterError(
            f"window {taus[-1]:.3g} ns spans less than 3 estimated coherence "
            f"times ({tau0:.3g} ns); fit would be unconstrained"
        )

    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or w.min() < 0:
            raise InvalidParameterError("weights must be non-negative, one per bin")

    b, tau_c = float(b0), float(tau0)
    lam = 1e-3
    r = _bunching_residuals(taus, y, w, b, tau_c)
    cost = float(r @ r)
    converged = False
    for _ in range(max_iter):
        e = np.exp(-2.0 * taus / tau_c)
        jac = np.column_stack([e * w, b * e * (2.0 * taus / tau_c**2) * w])
        jtj = jac.T @ jac
        jtr = jac.T @ r
        step_ok = False
        for _ in range(50):
            damped = jtj + lam * np.diag(np.diag(jtj))
            try:
                delta = np.linalg.solve(damped, jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            b_new, tau_new = b + delta[0], tau_c + delta[1]
            if tau_new <= 0:
                lam *= 10.0
                continue
            r_new = _bunching_residuals(taus, y, w, b_new, tau_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                step_ok = True
                break
            lam *= 10.0
        if not step_ok:
            break
        rel_step = max(
            abs(delta[0]) / max(abs(b_new), 1e-30),
            abs(delta[1]) / max(abs(tau_new), 1e-30),
        )
        b, tau_c, r, cost = b_new, tau_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-12)
        if rel_step < 1e-10:
            converged = True
            break

    ssr_flat = float(((y - 1.0) * w) @ ((y - 1.0) * w))
    sigma2 = cost / max(len(y) - 2, 1)
    if ssr_flat - cost <= 14.0 * sigma2:
        rms_flat = float(np.sqrt(np.mean((y - 1.0) ** 2)))
        return FitResult(b=0.0, tau_c=tau_c, residual_rms=rms_flat, converged=converged)

    raw = y - (1.0 + b * np.exp(-2.0 * taus / tau_c))
    rms = float(np.sqrt(np.mean(raw**2)))
    # negative amplitudes are clipped; the guard above already caught flat curves
    return FitResult(b=max(b, 0.0), tau_c=tau_c, residual_rms=rms, converged=converged)


def bandwidth_from_spectrum(freqs: np.ndarray, psd: np.ndarray) -> float:
    """Smallest frequency below which 80% of the AC spectral energy lies.

    The DC bin (frequency exactly zero) is excluded from the cumulative
    energy; energy fractions are scale-free.
    """
    freqs = np.asarray(freqs, dtype=float)
    psd = np.asarray(psd, dtype=float)
    if freqs.shape != psd.shape or freqs.ndim != 1:
        raise InvalidParameterError("freqs and psd must be matching 1-d arrays")
    ac = freqs > 0
    f = freqs[ac]
    p = psd[ac]
    total = p.sum()
    if not total > 0:
        raise InvalidParameterError("spectrum has no AC energy")
    cum = np.cumsum(p)
    k = int(np.searchsorted(cum, 0.8 * total))
    return float(f[min(k, f.size - 1)])


def effective_bandwidth(
    trace: IntensityTrace, segment_length: int = 4096, window: str = "hann"
) -> float:
    """80%-energy bandwidth of the intensity fluctuations, in GHz.

    The mean is removed, the one-sided spectrum is estimated with an
    averaged periodogram (Hann taper, 50% segment overlap, segment length
    4096 by default) and the cumulative-energy crossing is returned.
    """
    x = trace.samples
    if x.size < 4096:
        raise InvalidParameterError("trace must contain at least 4096 samples")
    if np.ptp(x) == 0:
        raise InvalidParameterError("constant trace has no AC energy")
    freqs, psd = welch(
        x - x.mean(),
        fs=1.0 / trace.dt,  # 1/ns, so frequencies are in GHz
        window=window,
        nperseg=segment_length,
        noverlap=segment_length // 2,
        detrend="constant",
    )
    return bandwidth_from_spectrum(freqs, psd)
