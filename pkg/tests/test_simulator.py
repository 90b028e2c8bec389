import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from hbtcorr import (
    DeadTimeSaturationWarning,
    DetectorConfig,
    IntensityTrace,
    InvalidParameterError,
    PhotonStream,
    SourceModel,
    apply_detector,
    beam_split,
    run_hbt,
    sample_photons,
    simulate_detection,
    simulate_field,
    simulate_intensity,
    start_stop_histogram,
)

US = 1_000_000  # ps per microsecond


def stream(times_ps, duration_ps):
    return PhotonStream(np.asarray(times_ps, dtype=np.int64), int(duration_ps))


# --- intensity ----------------------------------------------------------------


def test_coherent_intensity_constant():
    tr = simulate_intensity(SourceModel.coherent(0.04), 1.0, 100.0, seed=1)
    assert_allclose(tr.samples, 0.04)


def test_intensity_rejects_coarse_dt():
    model = SourceModel.chaotic(0.04, 0.5)
    with pytest.raises(InvalidParameterError):
        simulate_intensity(model, 0.1, 100.0, seed=1)


def test_intensity_deterministic():
    model = SourceModel.chaotic(0.04, 0.5)
    a = simulate_intensity(model, 0.025, 500.0, seed=42)
    b = simulate_intensity(model, 0.025, 500.0, seed=42)
    assert_array_equal(a.samples, b.samples)


def test_chaotic_normalized_variance_is_one():
    # g2(0) = 2 means Var(I)/mean(I)^2 = 1
    model = SourceModel.chaotic(0.04, 0.5)
    tr = simulate_intensity(model, 0.025, 25_000.0, seed=5)
    u = tr.samples / tr.samples.mean()
    assert abs(np.var(u) - 1.0) < 0.05


def test_field_autocorrelation_matches_lorentzian():
    tau_c, dt = 0.5, 0.025
    E = simulate_field(tau_c, dt, 2_000_000, seed=11)
    lags = np.arange(0, int(3 * tau_c / dt) + 1)
    ac = np.array([np.mean(E[: E.size - k].conj() * E[k:]).real for k in lags])
    rms = np.sqrt(np.mean((ac - np.exp(-lags * dt / tau_c)) ** 2))
    assert rms < 0.02


def test_intensity_autocorrelation_matches_g2():
    tau_c, dt = 0.5, 0.025
    tr = simulate_intensity(SourceModel.chaotic(0.04, tau_c), dt, 50_000.0, seed=13)
    x = tr.samples / tr.samples.mean()
    lags = np.arange(0, int(3 * tau_c / dt) + 1)
    g2 = np.array([np.mean(x[: x.size - k] * x[k:]) for k in lags])
    rms = np.sqrt(np.mean((g2 - (1.0 + np.exp(-2.0 * lags * dt / tau_c))) ** 2))
    assert rms < 0.05


def test_mixed_intensity_mean_and_floor():
    model = SourceModel.mixed(0.04, 0.5, 0.5)
    tr = simulate_intensity(model, 0.025, 25_000.0, seed=3)
    assert abs(tr.samples.mean() - 0.04) / 0.04 < 0.05
    # the coherent pedestal bounds the intensity from below
    assert tr.samples.min() >= 0.04 * 0.5 * 0.999999


# --- photon sampling ------------------------------------------------------------


def test_sample_photons_zero_trace():
    tr = IntensityTrace(1.0, np.zeros(100))
    assert len(sample_photons(tr, seed=1)) == 0


def test_sample_photons_poisson_count():
    tr = IntensityTrace(1.0, np.full(1_000_000, 0.04))  # 1 ms at 0.04/ns
    s = sample_photons(tr, seed=2)
    assert abs(len(s) - 40_000) <= 600  # 3 sigma


def test_sample_photons_deterministic():
    tr = IntensityTrace(1.0, np.full(10_000, 0.04))
    a = sample_photons(tr, seed=9)
    b = sample_photons(tr, seed=9)
    assert_array_equal(a.timestamps, b.timestamps)


def test_sample_photons_exponential_interarrivals():
    """Chi-square against the exponential law, 20 seeds, >= 19 must pass."""
    tr = IntensityTrace(1.0, np.full(1_000_000, 0.04))
    quantiles = np.linspace(0, 1, 21)[:-1]
    edges = np.append(-np.log(1.0 - quantiles) / 0.04, np.inf)
    passes = 0
    for seed in range(20):
        s = sample_photons(tr, seed=seed)
        intervals = np.diff(s.timestamps) / 1000.0  # ns
        observed, _ = np.histogram(intervals, bins=edges)
        expected = np.full(20, intervals.size / 20.0)
        chi2 = ((observed - expected) ** 2 / expected).sum()
        passes += stats.chi2.sf(chi2, df=19) > 0.01
    assert passes >= 19


# --- beam splitter ---------------------------------------------------------------


def test_beam_split_empty():
    s = stream([], 1000)
    a, b = beam_split(s, seed=1)
    assert len(a) == 0 and len(b) == 0


def test_beam_split_partition_exact():
    rng = np.random.default_rng(4)
    ts = np.sort(rng.integers(0, 10**9, 100_000))
    s = stream(ts, 10**9)
    a, b = beam_split(s, seed=7)
    merged = np.sort(np.concatenate([a.timestamps, b.timestamps]))
    assert_array_equal(merged, np.sort(ts))
    assert abs(len(a) - 50_000) <= 474  # 3 sigma binomial


# --- detector ---------------------------------------------------------------------


@pytest.mark.filterwarnings("ignore::hbtcorr.DeadTimeSaturationWarning")
def test_dead_time_rule_example():
    s = stream([0, 1 * US, 5 * US], 10 * US)
    cfg = DetectorConfig(efficiency=1.0, dead_time=4000.0, dark_rate=0.0, resolution=1)
    out = apply_detector(s, cfg, seed=1)
    assert_array_equal(out.timestamps, [0, 5 * US])


def test_zero_efficiency_empty():
    s = stream([10, 20, 30], 100)
    cfg = DetectorConfig(efficiency=0.0, dead_time=0.0, resolution=1)
    assert len(apply_detector(s, cfg, seed=1)) == 0


def test_quantization_floor():
    s = stream([123], 1000)
    cfg = DetectorConfig(efficiency=1.0, dead_time=0.0, resolution=65)
    out = apply_detector(s, cfg, seed=1)
    assert_array_equal(out.timestamps, [65])


@pytest.mark.filterwarnings("ignore::hbtcorr.DeadTimeSaturationWarning")
def test_dead_time_gap_postcondition_exact():
    rng = np.random.default_rng(8)
    ts = np.sort(rng.integers(0, 10**8, 50_000))
    cfg = DetectorConfig(efficiency=0.8, dead_time=50.0, dark_rate=1e6, resolution=65)
    out = apply_detector(stream(ts, 10**8), cfg, seed=3)
    assert np.diff(out.timestamps).min() >= 50_000  # ps


def test_dead_time_saturation_warning():
    # counting at 270 kcounts/s with a 4 us dead time: flux x dead time ~ 1.08
    rng = np.random.default_rng(0)
    n = rng.poisson(270e3 * 0.05)
    ts = np.sort(rng.integers(0, int(0.05e12), n))
    cfg = DetectorConfig(efficiency=1.0, dead_time=4000.0, resolution=65)
    with pytest.warns(DeadTimeSaturationWarning):
        apply_detector(stream(ts, int(0.05e12)), cfg, seed=1)


def test_no_warning_for_low_flux():
    import warnings

    ts = np.arange(0, 10**9, 10**7, dtype=np.int64)  # 100 counts/ms
    cfg = DetectorConfig(efficiency=1.0, dead_time=100.0, resolution=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", DeadTimeSaturationWarning)
        apply_detector(stream(ts, 10**9), cfg, seed=1)


def test_dark_counts_poisson_dispersion():
    cfg = DetectorConfig(efficiency=1.0, dead_time=0.0, dark_rate=1e5, resolution=1)
    empty = stream([], int(1e12))  # 1 s
    out = apply_detector(empty, cfg, seed=21)
    counts = np.bincount(out.timestamps // int(1e9), minlength=1000)
    dispersion = (counts.size - 1) * counts.var(ddof=1) / counts.mean()
    lo, hi = stats.chi2.ppf([0.005, 0.995], counts.size - 1)
    assert lo <= dispersion <= hi


def test_afterpulses_added():
    ts = np.arange(0, 10**7, 10**4, dtype=np.int64)
    cfg = DetectorConfig(
        efficiency=1.0, dead_time=0.0, resolution=1,
        afterpulse_prob=0.5, afterpulse_tau=10.0,
    )
    out = apply_detector(stream(ts, 10**7), cfg, seed=5)
    extra = len(out) - ts.size
    assert abs(extra - ts.size / 2) < 3 * np.sqrt(ts.size / 4)


def test_detector_config_validation():
    with pytest.raises(InvalidParameterError):
        DetectorConfig(efficiency=1.2)
    with pytest.raises(InvalidParameterError):
        DetectorConfig(afterpulse_prob=0.1)  # missing afterpulse_tau
    ideal = DetectorConfig.ideal()
    assert ideal.efficiency == 1.0 and ideal.dead_time == 0.0


# --- start-stop histogram ------------------------------------------------------------


def test_start_stop_example():
    starts = stream([10_000, 500_000], 10**6)
    stops = stream([12_000, 40_000, 510_000], 10**6)
    hist = start_stop_histogram(starts, stops, bin_width=1.0, window=100.0)
    assert hist.start_count == 2
    expected = np.zeros(100, dtype=np.int64)
    expected[2] = 1
    expected[10] = 1
    assert_array_equal(hist.counts, expected)


def test_start_stop_no_stops():
    starts = stream([10_000, 20_000], 10**6)
    hist = start_stop_histogram(starts, stream([], 10**6), 1.0, 100.0)
    assert hist.counts.sum() == 0
    assert hist.start_count == 2


def test_start_stop_window_boundary_strict():
    starts = stream([0], 10**6)
    stops = stream([100_000], 10**6)  # exactly at the 100 ns boundary
    hist = start_stop_histogram(starts, stops, 1.0, 100.0)
    assert hist.counts.sum() == 0


def test_start_stop_equal_timestamp_not_later():
    starts = stream([5_000], 10**6)
    stops = stream([5_000, 7_000], 10**6)
    hist = start_stop_histogram(starts, stops, 1.0, 100.0)
    assert hist.counts[2] == 1 and hist.counts.sum() == 1


def test_start_stop_rejects_fractional_ps_bins():
    starts = stream([0], 10**6)
    stops = stream([500], 10**6)
    with pytest.raises(InvalidParameterError):
        start_stop_histogram(starts, stops, bin_width=0.0333, window=10.0)


# --- composite run ---------------------------------------------------------------------


def test_run_hbt_deterministic():
    model = SourceModel.chaotic(0.04, 0.5)
    det = DetectorConfig.ideal()
    h1 = run_hbt(model, det, duration=100_000.0, bin_width=0.1, seed=99)
    h2 = run_hbt(model, det, duration=100_000.0, bin_width=0.1, seed=99)
    assert_array_equal(h1.counts, h2.counts)
    assert h1.start_count == h2.start_count


def test_merge_histograms_exact():
    from hbtcorr import merge_histograms

    model = SourceModel.coherent(0.1)
    det = DetectorConfig.ideal()
    parts = [run_hbt(model, det, 20_000.0, 0.5, seed=s) for s in (1, 2, 3)]
    merged = merge_histograms(parts)
    assert merged.start_count == sum(p.start_count for p in parts)
    assert_array_equal(merged.counts, parts[0].counts + parts[1].counts + parts[2].counts)
    # commutative
    assert_array_equal(merge_histograms(parts[::-1]).counts, merged.counts)
    with pytest.raises(InvalidParameterError):
        merge_histograms([])


def test_run_hbt_rejects_bin_below_resolution():
    model = SourceModel.coherent(0.04)
    det = DetectorConfig(efficiency=1.0, dead_time=0.0, resolution=200)
    with pytest.raises(InvalidParameterError):
        run_hbt(model, det, duration=1000.0, bin_width=0.1, seed=1)


def test_simulate_detection_streams_share_duration():
    model = SourceModel.coherent(0.1)
    a, b = simulate_detection(model, DetectorConfig.ideal(), 50_000.0, 0.1, seed=2)
    assert a.duration == b.duration
    assert len(a) > 0 and len(b) > 0
