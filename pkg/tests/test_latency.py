import math
import warnings

import numpy as np
import pytest

from fingertip.latency import (
    AmbiguousPeakWarning,
    LatencyError,
    TimeSeries,
    TransitionError,
    approach_press_profile,
    cross_correlation,
    detect_transition,
    estimate_latency,
    zero_phase_moving_average,
)
from oracles import band_limited


def _shifted_pair(rng, rate, delay_samples, n=4000, cutoff=20.0):
    pad = abs(delay_samples) + 1
    x = band_limited(rng, n + 2 * pad, rate, cutoff)
    truth = x[pad : pad + n]
    measured = x[pad - delay_samples : pad - delay_samples + n]
    return TimeSeries(rate, truth), TimeSeries(rate, measured)


def test_timeseries_validation():
    with pytest.raises(LatencyError):
        TimeSeries(0.0, [1, 2])
    with pytest.raises(LatencyError):
        TimeSeries(100.0, [1, math.nan])
    ts = TimeSeries(100.0, np.arange(5.0), start=1.0)
    assert ts.times == pytest.approx([1.0, 1.01, 1.02, 1.03, 1.04])


def test_csv_round_trip_and_rate_inference(tmp_path):
    ts = TimeSeries(250.0, np.sin(np.arange(100) / 7.0), start=0.5)
    ts.to_csv(tmp_path / "a.csv")
    back = TimeSeries.from_csv(tmp_path / "a.csv")
    assert back.rate == pytest.approx(250.0, rel=1e-6)
    assert back.start == pytest.approx(0.5)
    assert np.allclose(back.values, ts.values, rtol=1e-8)


def test_csv_rejects_bad_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("time,v\n0,1\n1,2\n")
    with pytest.raises(LatencyError, match="header"):
        TimeSeries.from_csv(p)
    p.write_text("t_s,value\n0,1\n0.1,2\n0.5,3\n")
    with pytest.raises(LatencyError, match="uniformly"):
        TimeSeries.from_csv(p)


def test_zero_shift_gives_zero():
    rng = np.random.default_rng(0)
    a, b = _shifted_pair(rng, 1000.0, 0)
    assert estimate_latency(a, b) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("refine", [False, True])
def test_random_shifts_recovered(refine):
    rng = np.random.default_rng(1)
    rate = 1000.0
    for _ in range(100):
        d = int(rng.integers(-200, 201))
        a, b = _shifted_pair(rng, rate, d)
        assert abs(estimate_latency(a, b, refine=refine) - d / rate) <= 1.0 / rate


def test_amplitude_and_offset_do_not_move_peak():
    rng = np.random.default_rng(2)
    a, b = _shifted_pair(rng, 500.0, 9)
    base = estimate_latency(a, b, refine=False)
    for gain, offset in [(3.0, 0.0), (0.01, 5.0), (7.0, -100.0)]:
        b2 = TimeSeries(b.rate, gain * b.values + offset)
        a2 = TimeSeries(a.rate, a.values * (1 / gain) - offset)
        assert estimate_latency(a, b2, refine=False) == base
        assert estimate_latency(a2, b, refine=False) == base


def test_correlation_is_normalized():
    rng = np.random.default_rng(3)
    a, b = _shifted_pair(rng, 1000.0, 0)
    corr, lags = cross_correlation(a, b, 0.05)
    assert corr.max() == pytest.approx(1.0, abs=1e-12)
    assert lags[np.argmax(corr)] == 0.0
    assert np.all(np.abs(lags) <= 0.05 + 1e-9)


def test_start_offset_enters_lag():
    rng = np.random.default_rng(4)
    a, b = _shifted_pair(rng, 1000.0, 0)
    late = TimeSeries(b.rate, b.values, start=0.012)
    assert estimate_latency(a, late) == pytest.approx(0.012, abs=1e-3)


def test_mismatched_rates_and_constant_signals_rejected():
    with pytest.raises(LatencyError):
        estimate_latency(TimeSeries(100.0, np.arange(10.0)), TimeSeries(200.0, np.arange(10.0)))
    with pytest.raises(LatencyError):
        estimate_latency(TimeSeries(100.0, np.ones(10)), TimeSeries(100.0, np.arange(10.0)))


def test_periodic_signal_warns_ambiguous():
    t = np.arange(20000) / 1000.0
    x = np.sin(2 * math.pi * 10 * t)
    with pytest.warns(AmbiguousPeakWarning):
        estimate_latency(TimeSeries(1000.0, x), TimeSeries(1000.0, np.roll(x, 3)), max_lag=0.25)


def test_filter_impulse_response_is_symmetric_triangle():
    for w in (1, 3, 7, 15):
        x = np.zeros(101)
        x[50] = 1.0
        y = zero_phase_moving_average(TimeSeries(100.0, x), w).values
        assert np.allclose(y, y[::-1], atol=1e-15)
        assert y.sum() == pytest.approx(1.0)
        tri = np.convolve(np.ones(w), np.ones(w)) / w**2
        assert np.allclose(y[50 - (w - 1) : 50 + w], tri, atol=1e-15)


def test_filter_preserves_constants_and_length():
    x = TimeSeries(100.0, np.full(40, 3.5))
    y = zero_phase_moving_average(x, 15)
    assert len(y) == 40 and np.allclose(y.values, 3.5)


@pytest.mark.parametrize("window", [7, 15])
def test_filter_has_no_phase_shift_on_sinusoid(window):
    rate = 1000.0
    t = np.arange(4000) / rate
    # well below the first null at rate / window
    freq = 0.2 * rate / window
    x = TimeSeries(rate, np.sin(2 * math.pi * freq * t))
    y = zero_phase_moving_average(x, window)
    # a sinusoid's lag is only defined modulo its period
    assert estimate_latency(x, y, max_lag=0.45 / freq, refine=False) == 0.0


@pytest.mark.parametrize("window", [0, 2, 4.5, 101])
def test_filter_rejects_bad_windows(window):
    with pytest.raises(LatencyError):
        zero_phase_moving_average(TimeSeries(100.0, np.zeros(50)), window)


def test_transition_on_constructed_profile():
    prox, force = approach_press_profile(rate=200.0, contact_time=1.0)
    ev = detect_transition(prox, force)
    assert abs(ev.contact_time - 1.0) <= 1 / 200.0
    assert ev.first_force_time >= ev.contact_time - 1 / 200.0


def test_transition_ignores_sub_threshold_noise():
    rng = np.random.default_rng(5)
    for _ in range(20):
        contact = float(rng.uniform(0.5, 1.5))
        prox, force = approach_press_profile(rate=200.0, contact_time=contact, force_noise=0.04, prox_noise=1.0, rng=rng)
        ev = detect_transition(prox, force, force_eps=0.2)
        assert abs(ev.contact_time - contact) <= 1 / 200.0
        # the ramp reaches 0.2 N after 0.2 / (5 / 0.3) s
        assert ev.first_force_time == pytest.approx(contact + 0.012, abs=3 / 200.0)


def test_no_transition_errors():
    prox = TimeSeries(100.0, np.full(50, 40.0))
    with pytest.raises(TransitionError):
        detect_transition(prox, TimeSeries(100.0, np.zeros(50)))
    prox, _ = approach_press_profile()
    with pytest.raises(TransitionError):
        detect_transition(prox, TimeSeries(prox.rate, np.zeros(len(prox))))
    with pytest.raises(LatencyError):
        detect_transition(prox, TimeSeries(prox.rate, np.zeros(len(prox) - 1)))
