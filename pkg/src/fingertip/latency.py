"""End-to-end latency measurement and contact-transition analysis.

Latency is the time shift that maximizes the normalized cross-correlation
between a ground-truth signal and the sensor's processed output. Both signals
are de-meaned and scaled to unit energy first, so gain and offset mismatch
between the reference rig and the sensor cannot move the peak.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._io import read_csv, write_csv


class LatencyError(ValueError):
    pass


class TransitionError(LatencyError):
    """No proximity-to-contact transition in the series."""


class AmbiguousPeakWarning(UserWarning):
    """The second-best correlation peak is within 1% of the best one."""


@dataclass
class TimeSeries:
    rate: float
    values: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise LatencyError("sample rate must be positive")
        if self.values.ndim != 1:
            raise LatencyError("time series values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise LatencyError("time series contains non-finite values")

    def __len__(self):
        return len(self.values)

    @property
    def dt(self):
        return 1.0 / self.rate

    @property
    def times(self):
        return self.start + np.arange(len(self.values)) / self.rate

    def to_csv(self, path=None):
        return write_csv(path, ["t_s", "value"], zip(self.times.tolist(), self.values.tolist()))

    @classmethod
    def from_csv(cls, path, rate=None):
        """Read a ``t_s,value`` file; the rate is inferred from the time column if not given."""
        header, rows = read_csv(path)
        if header[:2] != ["t_s", "value"]:
            raise LatencyError(f"{path}: expected header t_s,value, got {','.join(header)}")
        try:
            data = np.array([[float(r[0]), float(r[1])] for r in rows])
        except (ValueError, IndexError) as exc:
            raise LatencyError(f"{path}: bad row ({exc})") from None
        if len(data) < 2:
            raise LatencyError(f"{path}: need at least two samples")
        t = data[:, 0]
        if rate is None:
            step = np.diff(t)
            rate = 1.0 / float(np.median(step))
            if np.max(np.abs(step * rate - 1.0)) > 1e-3:
                raise LatencyError(f"{path}: samples are not uniformly spaced")
        return cls(rate, data[:, 1], float(t[0]))


@dataclass(frozen=True)
class TransitionEvent:
    contact_time: float
    prox_floor: float
    first_force_time: float


def _unit(x, what):
    x = x - x.mean()
    energy = math.sqrt(float(np.dot(x, x)))
    if energy == 0.0:
        raise LatencyError(f"{what} signal is constant")
    return x / energy


def _window_sums(x, starts, counts):
    c = np.concatenate(([0.0], np.cumsum(x)))
    return c[starts + counts] - c[starts]


def cross_correlation(truth, measured, max_lag=0.5):
    """Pearson correlation of the overlapping parts at each lag within ``+-max_lag``.

    Each lag is scored only on the samples the two signals share there, so a
    pure shift scores exactly 1 at its lag however smooth the signal is.
    A peak at lag ``L`` means ``measured`` trails ``truth`` by ``L`` seconds.
    """
    if not math.isclose(truth.rate, measured.rate, rel_tol=1e-9):
        raise LatencyError("sample rates differ; resample one signal first")
    a = _unit(truth.values, "truth")
    b = _unit(measured.values, "measured")
    na, nb = len(a), len(b)
    k = signal.correlation_lags(nb, na, mode="full")
    lags = k / truth.rate + (measured.start - truth.start)
    keep = np.abs(lags) <= max_lag + 0.5 / truth.rate
    if not np.any(keep):
        raise LatencyError("no overlap between the signals inside the lag window")

    # a[n] pairs with b[n + k] for n in [lo, hi)
    lo = np.maximum(0, -k)
    m = np.minimum(na, nb - k) - lo
    sab = signal.correlate(b, a, mode="full", method="auto")
    sa, saa = _window_sums(a, lo, m), _window_sums(a * a, lo, m)
    sb, sbb = _window_sums(b, lo + k, m), _window_sums(b * b, lo + k, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        cov = sab - sa * sb / m
        var = (saa - sa * sa / m) * (sbb - sb * sb / m)
        corr = cov / np.sqrt(var)
    # too little overlap to say anything
    corr[~np.isfinite(corr) | (m < 2) | (var <= 0)] = -1.0
    return np.clip(corr[keep], -1.0, 1.0), lags[keep]


def estimate_latency(truth, measured, max_lag=0.5, refine=False):
    """Delay (seconds) of ``measured`` relative to ``truth``.

    The integer-sample peak is refined with a parabola through its two
    neighbours when ``refine`` is set. Emits :class:`AmbiguousPeakWarning`
    if another local maximum comes within 1% of the peak.
    """
    corr, lags = cross_correlation(truth, measured, max_lag)
    i = int(np.argmax(corr))
    best = corr[i]

    peaks, _ = signal.find_peaks(corr)
    others = corr[peaks[peaks != i]]
    if others.size and best > 0 and others.max() >= 0.99 * best:
        warnings.warn(
            f"ambiguous correlation peak: runner-up {others.max():.4g} vs best {best:.4g}",
            AmbiguousPeakWarning,
            stacklevel=2,
        )

    lag = lags[i]
    if refine and 0 < i < len(corr) - 1:
        y0, y1, y2 = corr[i - 1], corr[i], corr[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0:
            lag += 0.5 * (y0 - y2) / denom / truth.rate
    return float(lag)


def zero_phase_moving_average(x, window):
    """Moving average run forward and then backward over the series.

    The net response is a symmetric triangle of ``2 * window - 1`` taps with
    unit gain, so there is no phase shift. Ends are padded by reflection.
    """
    if int(window) != window or window < 1 or window % 2 == 0:
        raise LatencyError("window must be a positive odd integer")
    window = int(window)
    if window > len(x):
        raise LatencyError(f"window {window} is longer than the series ({len(x)} samples)")
    if window == 1:
        return TimeSeries(x.rate, x.values.copy(), x.start)
    pad = window - 1
    xp = np.pad(x.values, pad, mode="reflect") if len(x) > 1 else np.full(2 * pad + 1, x.values[0])
    box = np.full(window, 1.0 / window)
    y = np.convolve(xp, box)[: len(xp)]
    y = np.convolve(y[::-1], box)[: len(xp)][::-1]
    return TimeSeries(x.rate, y[pad : pad + len(x)], x.start)


def detect_transition(proximity, normal_force, prox_floor=10.0, force_eps=0.2):
    """Find the moment the proximity reading bottoms out and the first force after it.

    Args:
        proximity: distance series in millimetres.
        normal_force: normal-force series in newtons, sampled on the same clock.
        prox_floor: lower bound of the proximity range (mm).
        force_eps: force magnitude that counts as contact (N).
    """
    if not math.isclose(proximity.rate, normal_force.rate, rel_tol=1e-9) or len(proximity) != len(
        normal_force
    ):
        raise LatencyError("proximity and force series must share rate and length")
    if not math.isclose(proximity.start, normal_force.start, abs_tol=0.5 / proximity.rate):
        raise LatencyError("proximity and force series must start together")
    below = np.flatnonzero(proximity.values <= prox_floor)
    if below.size == 0:
        raise TransitionError(f"proximity never reaches the {prox_floor} mm floor")
    i_contact = int(below[0])
    pressed = np.flatnonzero(np.abs(normal_force.values[i_contact:]) > force_eps)
    if pressed.size == 0:
        raise TransitionError("no force above threshold after the proximity floor was reached")
    t = proximity.times
    return TransitionEvent(float(t[i_contact]), float(prox_floor), float(t[i_contact + pressed[0]]))


def approach_press_profile(
    rate=200.0,
    duration=2.0,
    contact_time=1.0,
    start_distance=60.0,
    prox_floor=10.0,
    peak_force=5.0,
    press_time=0.3,
    force_noise=0.0,
    prox_noise=0.0,
    rng=None,
):
    """Synthetic approach-then-press recording, like a fingertip touching a block.

    The proximity reading falls linearly and reaches ``prox_floor`` exactly at
    ``contact_time`` (then reads 0, the out-of-range value below the floor).
    The normal force is zero before contact and ramps to ``-peak_force`` over
    ``press_time``. Returns ``(proximity, force)`` series.
    """
    t = np.arange(int(round(duration * rate))) / rate
    prox = start_distance + (prox_floor - start_distance) * t / contact_time
    force = -peak_force * np.clip((t - contact_time) / press_time, 0.0, 1.0)
    if rng is not None:
        prox = prox + rng.normal(0.0, prox_noise, t.size)
        force = force + rng.normal(0.0, force_noise, t.size)
    # The reading stays above the floor until contact, whatever the noise.
    prox = np.where(t < contact_time, np.maximum(prox, prox_floor + 1e-9), 0.0)
    return TimeSeries(rate, prox), TimeSeries(rate, force)
