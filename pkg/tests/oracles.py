"""Independent reference implementations used only by the tests."""

import math

import numpy as np


def rk4_collision(m_r, k, v0, t_l, u, n_free=2000, n_forced=2000, t_end=None, max_step=1e-6):
    """Integrate m_r x'' = -k x (+ u once t >= t_l) for a batch of parameter sets.

    All arguments are 1-D arrays of equal length. Each draw is stepped on its
    own uniform grid with a knot exactly at ``t_l``; the step count is raised
    until no step exceeds ``max_step``. Returns ``(t, x)`` of shape
    ``(n_draws, n_free + n_forced + 1)``.
    """
    m_r, k, v0, t_l, u = (np.asarray(a, dtype=float) for a in (m_r, k, v0, t_l, u))
    t_end = np.asarray(t_end, dtype=float)
    n_free = max(n_free, int(math.ceil(t_l.max() / max_step)))
    n_forced = max(n_forced, int(math.ceil((t_end - t_l).max() / max_step)))

    def accel(x, force):
        return (-k * x + force) / m_r

    x = np.zeros_like(v0)
    v = v0.copy()
    xs = [x.copy()]
    ts = [np.zeros_like(v0)]
    for h, n, force, t0 in (
        (t_l / n_free, n_free, np.zeros_like(u), np.zeros_like(v0)),
        ((t_end - t_l) / n_forced, n_forced, u, t_l),
    ):
        for j in range(n):
            k1x, k1v = v, accel(x, force)
            k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x, force)
            k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x, force)
            k4x, k4v = v + h * k3v, accel(x + h * k3x, force)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            xs.append(x)
            ts.append(t0 + (j + 1) * h)
    return np.array(ts).T, np.array(xs).T


def naive_mlp(weights, biases, x):
    """Straight loop-over-neurons forward pass of a ReLU network with linear output."""
    a = list(map(float, x))
    for layer, (w, b) in enumerate(zip(weights, biases)):
        out = []
        for j in range(w.shape[1]):
            z = float(b[j])
            for i in range(w.shape[0]):
                z += a[i] * float(w[i, j])
            out.append(z if layer == len(weights) - 1 else max(z, 0.0))
        a = out
    return np.array(a)


def rotation_about(axis, angle):
    """Rodrigues' formula."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * kx @ kx


def band_limited(rng, n, rate, cutoff=20.0):
    """White noise low-passed in the frequency domain."""
    spec = np.fft.rfft(rng.normal(size=n))
    f = np.fft.rfftfreq(n, 1.0 / rate)
    spec[f > cutoff] = 0.0
    return np.fft.irfft(spec, n)
