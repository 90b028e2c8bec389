"""Closed-form first- and second-order coherence of chaotic, coherent and mixed light.

The chaotic component has a Lorentzian line shape, so the field correlation
is g1(tau) = exp(-|tau|/tau_c) and the intensity correlation follows the
Gaussian-field relation g2 = 1 + |g1|**2.  A chaotic fraction m in [0, 1]
interpolates between coherent (m=0) and fully chaotic (m=1) light via a
statistical mixture, giving g2(tau) = 1 + m**2 * exp(-2|tau|/tau_c).

All operations are pure functions; safe for concurrent use.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameterError
from .types import CorrelationCurve, ProbabilitySeries, SourceModel


def g1_lorentzian(tau, tau_c: float):
    """First-order (field) correlation of Lorentzian light: exp(-|tau|/tau_c).

    ``tau`` may be a scalar or array of delays in ns; ``tau_c`` is the
    coherence time in ns, strictly positive.
    """
    if not tau_c > 0:
        raise InvalidParameterError(f"tau_c must be > 0, got {tau_c}")
    return np.exp(-np.abs(tau) / tau_c)


def g2_model(tau, model: SourceModel):
    """Second-order correlation 1 + m**2 * exp(-2|tau|/tau_c) of the source.

    Reduces to 1 + exp(-2|tau|/tau_c) for fully chaotic light (m=1) and to
    the flat value 1 for coherent light (m=0).
    """
    m = model.chaotic_fraction
    if m == 0.0:
        return np.ones_like(np.asarray(tau, dtype=float))
    g1 = g1_lorentzian(tau, model.coherence_time)
    return 1.0 + m * m * g1 * g1


def g2_curve(model: SourceModel, bin_width: float, num_bins: int) -> CorrelationCurve:
    """g2_model sampled on the one-sided grid tau_k = k * bin_width."""
    if not bin_width > 0:
        raise InvalidParameterError(f"bin_width must be > 0, got {bin_width}")
    if num_bins < 1:
        raise InvalidParameterError(f"num_bins must be >= 1, got {num_bins}")
    taus = np.arange(num_bins) * bin_width
    return CorrelationCurve(bin_width, np.asarray(g2_model(taus, model), dtype=float))


def g_theoretical(
    model: SourceModel, bin_width: float, num_bins: int
) -> ProbabilitySeries:
    """Per-bin pair rate G[k] = (mean_rate * bin_width) * g2(k * bin_width).

    Values are probabilities per bin, so the per-bin probability
    interpretation requires mean_rate * bin_width * 2 < 1; parameter sets
    violating that are rejected.
    """
    if not bin_width > 0:
        raise InvalidParameterError(f"bin_width must be > 0, got {bin_width}")
    if num_bins < 1:
        raise InvalidParameterError(f"num_bins must be >= 1, got {num_bins}")
    rate_per_bin = model.mean_rate * bin_width
    if rate_per_bin * 2.0 >= 1.0:
        raise InvalidParameterError(
            f"mean_rate * bin_width = {rate_per_bin} too large; per-bin pair "
            "probabilities would reach 1 and the self-convolution series "
            "would not converge"
        )
    taus = np.arange(num_bins) * bin_width
    values = rate_per_bin * np.asarray(g2_model(taus, model), dtype=float)
    return ProbabilitySeries(bin_width, values)


def coherence_time_from_linewidth(fwhm_linewidth: float) -> float:
    """Coherence time in ns from the FWHM field linewidth in Hz.

    Uses the Lorentzian-lineshape relation tau_c = 1 / (pi * FWHM), the one
    consistent with g1(tau) = exp(-|tau|/tau_c).
    """
    if not fwhm_linewidth > 0:
        raise InvalidParameterError(
            f"fwhm_linewidth must be > 0, got {fwhm_linewidth}"
        )
    return 1e9 / (math.pi * fwhm_linewidth)


def linewidth_from_coherence_time(tau_c: float) -> float:
    """Inverse of :func:`coherence_time_from_linewidth`: FWHM in Hz from tau_c in ns."""
    if not tau_c > 0:
        raise InvalidParameterError(f"tau_c must be > 0, got {tau_c}")
    return 1e9 / (math.pi * tau_c)
