# %% [markdown]
# Measuring sensor latency by cross-correlation, and spotting the moment a
# proximity reading hands over to a force reading.

# %%
import numpy as np

from fingertip.latency import (
    TimeSeries,
    approach_press_profile,
    cross_correlation,
    detect_transition,
    estimate_latency,
    zero_phase_moving_average,
)

rng = np.random.default_rng(1)
rate, delay = 1000.0, 7
spec = np.fft.rfft(rng.normal(size=5000))
spec[np.fft.rfftfreq(5000, 1 / rate) > 20] = 0
x = np.fft.irfft(spec, 5000)
truth, measured = TimeSeries(rate, x[delay:]), TimeSeries(rate, x[:-delay])
print(f"recovered lag: {estimate_latency(truth, measured, max_lag=0.05) * 1e3:.3f} ms")

# %% The correlation around the peak
corr, lags = cross_correlation(truth, measured, max_lag=0.012)
for lag, c in zip(lags[::3], corr[::3]):
    print(f"{lag * 1e3:+6.1f} ms  {c:.5f}")

# %% [markdown]
# The smoothing used for plotting runs a moving average forwards then
# backwards, so it blurs without shifting anything in time.

# %%
smooth = zero_phase_moving_average(truth, 15)
print("lag introduced by the filter:", estimate_latency(truth, smooth, max_lag=0.05), "s")

# %% Approach, bottom out, press
prox, force = approach_press_profile(contact_time=1.0, force_noise=0.04, prox_noise=1.0, rng=rng)
ev = detect_transition(prox, force)
print(f"proximity floor reached at {ev.contact_time:.3f} s, force shows up at {ev.first_force_time:.3f} s")
