"""Two-mass fingertip collision model and the collision impulse ratio.

A fingertip mass ``m_f`` and a finger mass ``m_r`` joined by a spring of
stiffness ``k`` hit a rigid wall at speed ``v0``. The fingertip stops in a
plastic impact; the finger mass then compresses the spring (displacement
``x >= 0``) until it returns to zero at ``t_f``. After the latency ``t_l`` the
actuator applies a constant force ``control_sign * F_in`` to the finger mass.

The total impulse transferred to the wall is ::

    I = m_f v0 + m_r v0 (1 - cos(w t_f)) + u (t_f - t_l - sin(w (t_f - t_l)) / w)

with ``w = sqrt(k / m_r)`` and ``u = control_sign * F_in``. This closed form is
exactly ``m_f v0 + integral_0^t_f k x(t) dt`` for the piecewise response, which
is how the tests check it. The natural impulse ``I_N`` is the same expression
with no input (``t_f = pi / w``), i.e. ``m_f v0 + 2 m_r v0``, and the impulse
ratio is ``eta = I / I_N``.

The default ``control_sign = -1`` is a retracting input. A positive input
pushes the finger deeper into the wall, lengthens contact, and for large
``F_in`` never lets go at all.
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._io import write_csv

SWEEP_HEADER = ["k_N_per_m", "t_l_s", "v0_m_per_s", "eta", "t_f_s", "I_Ns", "I_N_Ns", "status"]


class CollisionError(ValueError):
    """Raised for invalid collision parameters or evaluation times."""


class NoReleaseError(RuntimeError):
    """The finger never returns to zero displacement within the search horizon."""


class EtaRangeWarning(UserWarning):
    """The impulse ratio fell outside [0, 1]; usually a sign-convention problem."""


@dataclass(frozen=True)
class CollisionParams:
    """Scalars of the collision model (SI units).

    Defaults are the nominal values used for the stiffness/latency surfaces.
    """

    m_f: float = 0.005
    m_r: float = 0.1
    k: float = 1500.0
    v0: float = 0.15
    t_l: float = 0.007
    F_in: float = 10.0
    control_sign: int = -1

    def __post_init__(self):
        for name in ("m_f", "m_r", "k", "v0", "t_l", "F_in"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise CollisionError(f"{name} must be finite, got {value!r}")
        if self.m_r <= 0 or self.k <= 0:
            raise CollisionError("m_r and k must be positive")
        if self.m_f < 0 or self.v0 < 0 or self.t_l < 0 or self.F_in < 0:
            raise CollisionError("m_f, v0, t_l and F_in must be non-negative")
        if self.control_sign not in (1, -1):
            raise CollisionError("control_sign must be +1 or -1")

    @property
    def omega0(self):
        return math.sqrt(self.k / self.m_r)

    @property
    def half_period(self):
        """End time of the unforced collision, ``pi / omega0``."""
        return math.pi / self.omega0

    @property
    def control_force(self):
        return self.control_sign * self.F_in

    @property
    def unforced(self):
        """True when the input can never act during the collision."""
        return self.F_in == 0 or self.t_l >= self.half_period

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class CollisionResult:
    t_f: float
    I: float
    I_N: float
    eta: float
    status: str = "ok"
    trajectory: np.ndarray | None = field(default=None, repr=False)
    """Optional ``(n, 3)`` array of samples ``(t, x, F)``."""


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise CollisionError("evaluation times must be finite")
    if np.any(t < 0):
        raise CollisionError("evaluation times must be non-negative")
    return t


def _forced(p, t):
    # Response after the latency: a sinusoid about the static offset u/k.
    w = p.omega0
    x_l = p.v0 / w * math.sin(w * p.t_l)
    v_l = p.v0 * math.cos(w * p.t_l)
    offset = p.control_force / p.k
    tau = t - p.t_l
    return (x_l - offset) * np.cos(w * tau) + v_l / w * np.sin(w * tau) + offset


def displacement(params, t):
    """Finger-mass displacement ``x(t)``; accepts a scalar or an array of times.

    The formula is the piecewise closed form and is also meaningful past
    ``t_f`` (it then describes the hypothetical continued motion).
    """
    t = _check_times(t)
    w = params.omega0
    free = params.v0 / w * np.sin(w * t)
    if params.F_in == 0:
        x = free
    else:
        x = np.where(t < params.t_l, free, _forced(params, t))
    return float(x) if x.ndim == 0 else x


def force_on_finger(params, t):
    """Spring force on the finger mass, ``-k x(t)``."""
    return -params.k * displacement(params, t)


def collision_end_time(params, horizon_periods=10.0, tol=1e-12):
    """First time after impact at which the displacement returns to zero.

    Unforced collisions end at exactly ``pi / omega0``. Otherwise the forced
    branch is scanned from ``t_l`` in steps of a 200th of the half period and
    the first bracketed sign change is bisected down to ``tol`` seconds.

    Raises:
        NoReleaseError: no zero crossing within ``horizon_periods`` natural periods.
    """
    if params.v0 <= 0:
        raise CollisionError("collision_end_time needs v0 > 0")
    half = params.half_period
    if params.unforced:
        return half

    step = half / 200.0
    horizon = params.t_l + horizon_periods * 2.0 * half
    x = lambda s: float(_forced(params, s))  # noqa: E731

    lo = params.t_l
    while True:
        hi = lo + step
        if hi > horizon:
            raise NoReleaseError(
                f"no release within {horizon_periods} natural periods "
                f"(F_in={params.F_in}, control_sign={params.control_sign})"
            )
        if x(hi) <= 0.0:
            break
        lo = hi

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if x(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def natural_impulse(params):
    """Impulse of the unforced collision, ``m_f v0 + 2 m_r v0``."""
    # cos(w * pi / w) = -1 exactly; written out to keep eta(F_in=0) == 1 bitwise.
    return params.m_f * params.v0 + params.m_r * params.v0 * 2.0


def total_impulse(params, t_f=None):
    """Closed-form total impulse of the (possibly forced) collision."""
    if params.unforced:
        return natural_impulse(params)
    if t_f is None:
        t_f = collision_end_time(params)
    w = params.omega0
    tau = t_f - params.t_l
    return (
        params.m_f * params.v0
        + params.m_r * params.v0 * (1.0 - math.cos(w * t_f))
        + params.control_force * (tau - math.sin(w * tau) / w)
    )


def impulse_ratio(params):
    """Collision impulse ratio ``I / I_N``.

    Values outside [0, 1] are returned unchanged and flagged with an
    :class:`EtaRangeWarning`.
    """
    if params.v0 <= 0:
        raise CollisionError("impulse_ratio needs v0 > 0")
    eta = total_impulse(params) / natural_impulse(params)
    if not 0.0 <= eta <= 1.0:
        warnings.warn(f"impulse ratio {eta:.6g} outside [0, 1]", EtaRangeWarning, stacklevel=2)
    return eta


def solve(params, n_samples=0):
    """Evaluate the whole model; optionally sample the trajectory at ``n_samples`` times."""
    t_f = collision_end_time(params)
    I = total_impulse(params, t_f)
    I_N = natural_impulse(params)
    eta = I / I_N
    status = "ok" if 0.0 <= eta <= 1.0 else "eta_out_of_range"
    traj = None
    if n_samples:
        t = np.linspace(0.0, t_f, n_samples)
        x = displacement(params, t)
        traj = np.column_stack([t, x, -params.k * x])
    return CollisionResult(t_f=t_f, I=I, I_N=I_N, eta=eta, status=status, trajectory=traj)


@dataclass(frozen=True)
class SweepRow:
    k: float
    t_l: float
    v0: float
    eta: float
    t_f: float
    I: float
    I_N: float
    status: str

    def as_csv_row(self):
        return [self.k, self.t_l, self.v0, self.eta, self.t_f, self.I, self.I_N, self.status]


def _axis(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise CollisionError(f"sweep axis {name} must be a non-empty 1-D sequence")
    if np.any(np.diff(arr) <= 0):
        raise CollisionError(f"sweep axis {name} must be strictly increasing")
    return arr


def sweep_eta(k, t_l, v0, fixed=None):
    """Impulse ratio over the grid ``k x t_l x v0``.

    Rows come back in lexicographic grid order. Cells that fail are kept with
    NaN values and a status of ``no_release`` or ``invalid``; cells whose ratio
    leaves [0, 1] are marked ``eta_out_of_range``.
    """
    fixed = fixed or CollisionParams()
    axes = _axis(k, "k"), _axis(t_l, "t_l"), _axis(v0, "v0")
    rows = []
    for kk, tl, vv in itertools.product(*axes):
        kk, tl, vv = float(kk), float(tl), float(vv)
        nan = float("nan")
        try:
            res = solve(fixed.with_(k=kk, t_l=tl, v0=vv))
        except NoReleaseError:
            rows.append(SweepRow(kk, tl, vv, nan, nan, nan, nan, "no_release"))
            continue
        except CollisionError:
            rows.append(SweepRow(kk, tl, vv, nan, nan, nan, nan, "invalid"))
            continue
        rows.append(SweepRow(kk, tl, vv, res.eta, res.t_f, res.I, res.I_N, res.status))
    return rows


def write_sweep_csv(rows, path=None):
    """Write sweep rows with the standard header; returns the CSV text."""
    return write_csv(path, SWEEP_HEADER, [r.as_csv_row() for r in rows])
