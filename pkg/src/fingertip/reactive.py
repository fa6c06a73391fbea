"""Point-mass fingertip simulation of the reactive behaviours.

The finger is a point mass carrying the spherical sensor dome. Scene objects
(planes and axis-aligned boxes, each with a scripted motion) push back with a
penalty spring when the dome penetrates them. Sensing runs at its own rate;
every command is computed from one sensor snapshot and only takes effect
``latency`` seconds later, held until the next command arrives.

Behaviours:

* :class:`ContactFollowing` pushes with a constant force along the sensed
  contact normal (feed-forward only, no penetration feedback).
* :class:`PotentialField` turns every proximity reading below a threshold
  into a virtual spring pushing the fingertip away from the obstacle.
* :class:`CollisionReflex` applies a constant force along the contact normal
  once a contact has been seen, the control input of the collision model.
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ._io import write_csv
from .collision import CollisionParams
from .kinematics import R_SENSOR, ContactForce, RigidTransform, angles_from_point
from .mapping import PROX_MAX_MM, PROX_MIN_MM, DEFAULT_PROXIMITY_LAYOUT, ProximityArray
from .sensor import ContactState

LOG_HEADER = ["t_s", "px", "py", "pz", "vx", "vy", "vz", "fx", "fy", "fz", "contact_flag"]


class SimulationError(RuntimeError):
    pass


class SimulationUnstable(SimulationError):
    pass


class NotInContact(ValueError):
    pass


@dataclass
class FingertipPlant:
    mass: float = 0.1
    damping: float = 0.0
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = R_SENSOR
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    """Rotation of the sensor base frame in the world; fixed during a run."""

    def __post_init__(self):
        self.position = np.array(self.position, dtype=float)
        self.velocity = np.array(self.velocity, dtype=float)
        self.orientation = np.array(self.orientation, dtype=float)
        if not self.mass > 0:
            raise SimulationError("plant mass must be positive")

    @property
    def pose(self):
        return RigidTransform(self.orientation, self.position.copy())

    def step(self, force, dt):
        """Semi-implicit Euler: velocity first, then position with the new velocity."""
        acc = (np.asarray(force) - self.damping * self.velocity) / self.mass
        self.velocity = self.velocity + dt * acc
        self.position = self.position + dt * self.velocity


@dataclass
class Motion:
    """Scripted object motion: drift plus sinusoidal translation and tilt."""

    velocity: tuple = (0.0, 0.0, 0.0)
    amplitude: tuple = (0.0, 0.0, 0.0)
    frequency: float = 0.0
    tilt_axis: tuple = (1.0, 0.0, 0.0)
    tilt_amplitude: float = 0.0
    tilt_frequency: float = 0.0

    def offset(self, t):
        return np.asarray(self.velocity) * t + np.asarray(self.amplitude) * math.sin(
            2 * math.pi * self.frequency * t
        )

    def rotation(self, t):
        angle = self.tilt_amplitude * math.sin(2 * math.pi * self.tilt_frequency * t)
        axis = np.asarray(self.tilt_axis, dtype=float)
        return Rotation.from_rotvec(axis / np.linalg.norm(axis) * angle).as_matrix()


@dataclass
class SceneObject:
    """A plane (``kind="plane"``) or axis-aligned box (``kind="box"``).

    Planes are given by a point and an outward normal; boxes by a centre and
    half extents (boxes only translate, they never tilt).
    """

    kind: str
    center: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    half_extents: tuple = (0.05, 0.05, 0.05)
    stiffness: float = 1500.0
    motion: Motion = field(default_factory=Motion)

    def __post_init__(self):
        if self.kind not in ("plane", "box"):
            raise SimulationError(f"unknown scene object kind {self.kind!r}")
        if not self.stiffness > 0:
            raise SimulationError("object stiffness must be positive")
        if self.kind == "box" and min(self.half_extents) <= 0:
            raise SimulationError("box half extents must be positive")

    def at(self, t):
        """World ``(center, outward normal)`` at time ``t`` (normal unused for boxes)."""
        c = np.asarray(self.center, dtype=float) + self.motion.offset(t)
        n = np.asarray(self.normal, dtype=float)
        if self.kind == "plane":
            n = self.motion.rotation(t) @ (n / np.linalg.norm(n))
        return c, n

    def signed_distance(self, p, t):
        """Distance from ``p`` to the surface (negative inside) and the outward normal there."""
        c, n = self.at(t)
        if self.kind == "plane":
            return float(np.dot(p - c, n)), n
        h = np.asarray(self.half_extents, dtype=float)
        q = p - c
        outside = np.abs(q) - h
        if np.any(outside > 0):
            clamped = np.clip(q, -h, h)
            d = q - clamped
            dist = float(np.linalg.norm(d))
            return dist, d / dist
        axis = int(np.argmax(outside))
        normal = np.zeros(3)
        normal[axis] = math.copysign(1.0, q[axis])
        return float(outside[axis]), normal

    def ray_distance(self, origin, direction, t):
        c, n = self.at(t)
        if self.kind == "plane":
            denom = float(np.dot(direction, n))
            if denom >= 0:
                return math.inf
            s = float(np.dot(c - origin, n)) / denom
            return s if s >= 0 else math.inf
        h = np.asarray(self.half_extents, dtype=float)
        lo, hi = c - h, c + h
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origin) / direction
            t2 = (hi - origin) / direction
        t1 = np.where(np.isnan(t1), -np.inf, t1)
        t2 = np.where(np.isnan(t2), np.inf, t2)
        tmin, tmax = np.max(np.minimum(t1, t2)), np.min(np.maximum(t1, t2))
        if tmax < max(tmin, 0.0) or tmin < 0:
            return math.inf
        return float(tmin)


@dataclass
class Scene:
    objects: list = field(default_factory=list)

    def contact(self, plant, t):
        """Total penalty force on the plant and the deepest contact ``(depth, outward normal, k)``."""
        total = np.zeros(3)
        deepest = None
        for obj in self.objects:
            dist, n = obj.signed_distance(plant.position, t)
            depth = plant.radius - dist
            if depth > 0:
                total += obj.stiffness * depth * n
                if deepest is None or depth > deepest[0]:
                    deepest = (depth, n, obj.stiffness)
        return total, deepest

    def clearance(self, plant, t):
        """Smallest gap between the dome surface and any object (negative when penetrating)."""
        if not self.objects:
            return math.inf
        return min(obj.signed_distance(plant.position, t)[0] for obj in self.objects) - plant.radius

    def proximity(self, plant, t, layout=DEFAULT_PROXIMITY_LAYOUT):
        pose = plant.pose
        origins = pose.apply(layout.origins)
        dirs = pose.rotate(layout.directions)
        out = np.full(5, np.nan)
        for i in range(5):
            d = min((o.ray_distance(origins[i], dirs[i], t) for o in self.objects), default=math.inf)
            mm = d * 1000.0
            if PROX_MIN_MM <= mm <= PROX_MAX_MM:
                out[i] = mm
        return ProximityArray(out, layout)


def _sensed_contact(plant, deepest):
    # Oracle contact estimate: the sensor normal points into the touched object.
    if deepest is None:
        return None
    depth, outward, k = deepest
    n_local = plant.orientation.T @ -outward
    angles = angles_from_point(n_local * plant.radius, plant.radius)
    return ContactState(angles, ContactForce(0.0, 0.0, -k * depth))


def contact_normal_world(pose, sensed):
    ct, st = math.cos(sensed.angles.theta), math.sin(sensed.angles.theta)
    cp, sp = math.cos(sensed.angles.phi), math.sin(sensed.angles.phi)
    return pose.rotation @ np.array([sp * ct, -st, cp * ct])


def contact_following_step(pose, sensed, f_des, threshold=0.5):
    """Constant force ``f_des`` along the sensed contact normal, in the world frame.

    Raises:
        NotInContact: no contact, or the sensed normal force is below ``threshold``.
    """
    if sensed is None or abs(sensed.force.fz) < threshold:
        raise NotInContact("contact following needs a sensed contact")
    return f_des * contact_normal_world(pose, sensed)


def potential_field_step(pose, proximity, d_thresh=80.0, k_field=50.0):
    """Virtual spring force from proximity readings below ``d_thresh`` (mm); ``k_field`` in N/m."""
    dirs = pose.rotate(proximity.layout.directions)
    force = np.zeros(3)
    ok = proximity.in_range
    for i in np.flatnonzero(ok):
        d = proximity.readings[i]
        if d < d_thresh:
            force -= k_field * (d_thresh - d) / 1000.0 * dirs[i]
    return force


@dataclass
class NoControl:
    name = "none"

    def command(self, pose, sensed, proximity, t=0.0):
        return np.zeros(3)


@dataclass
class ContactFollowing:
    """Feed-forward push along the sensed normal.

    When the contact drops out, the last command is kept for ``hold``
    seconds so a brief unloading does not let the fingertip drift away.
    """

    f_des: float = 2.0
    threshold: float = 0.5
    hold: float = 0.1
    name = "contact_following"
    _last: tuple | None = None

    def command(self, pose, sensed, proximity, t=0.0):
        try:
            cmd = contact_following_step(pose, sensed, self.f_des, self.threshold)
        except NotInContact:
            if self._last is not None and t - self._last[0] <= self.hold:
                return self._last[1]
            return np.zeros(3)
        self._last = (t, cmd)
        return cmd


@dataclass
class PotentialField:
    d_thresh: float = 80.0
    k_field: float = 50.0
    name = "potential_field"

    def command(self, pose, sensed, proximity, t=0.0):
        return potential_field_step(pose, proximity, self.d_thresh, self.k_field)


@dataclass
class CollisionReflex:
    """After the first sensed contact, push with ``control_sign * F_in`` along the contact normal.

    ``control_sign = -1`` retracts. The direction is latched at the first contact.
    """

    F_in: float = 10.0
    control_sign: int = -1
    threshold: float = 0.0
    name = "collision_reflex"
    _direction: np.ndarray | None = None

    def command(self, pose, sensed, proximity, t=0.0):
        if self._direction is None:
            if sensed is None or abs(sensed.force.fz) <= self.threshold:
                return np.zeros(3)
            self._direction = contact_normal_world(pose, sensed)
        return self.control_sign * self.F_in * self._direction


BEHAVIORS = {
    "none": NoControl,
    "contact_following": ContactFollowing,
    "potential_field": PotentialField,
    "collision_reflex": CollisionReflex,
}


def make_behavior(name, **params):
    try:
        cls = BEHAVIORS[name]
    except KeyError:
        raise SimulationError(f"unknown behavior {name!r}; choose from {', '.join(BEHAVIORS)}") from None
    return cls(**params)


@dataclass
class TrajectoryLog:
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    command: np.ndarray
    contact_force: np.ndarray
    contact_flag: np.ndarray
    clearance: np.ndarray
    sensed_at: np.ndarray
    """Sensor timestamp behind the command applied at each step (NaN before the first)."""

    def to_csv(self, path=None):
        rows = []
        for i in range(len(self.t)):
            rows.append(
                [float(self.t[i]), *map(float, self.position[i]), *map(float, self.velocity[i]),
                 *map(float, self.command[i]), int(self.contact_flag[i])]
            )
        return write_csv(path, LOG_HEADER, rows)

    def contact_impulse(self, dt):
        return float(np.sum(np.linalg.norm(self.contact_force, axis=1)) * dt)


def simulate(
    scene,
    behavior,
    duration,
    dt=1e-3,
    plant=None,
    sensor_rate=200.0,
    latency=0.007,
    estimator=None,
    seed=0,
    bound=10.0,
    stop_on_release=False,
):
    """Integrate the plant under ``behavior`` and return the trajectory log.

    ``estimator`` may be ``(layout, model, noise_std)``: the oracle contact is
    then pushed through the pressure forward model and the network, and the
    network's estimate is what the behaviour sees. With ``stop_on_release``
    the run ends at the first step after a contact has ended.

    Raises:
        SimulationUnstable: the fingertip position leaves a ball of radius ``bound``.
    """
    if not duration > 0 or not dt > 0:
        raise SimulationError("duration and dt must be positive")
    if not sensor_rate > 0 or latency < 0:
        raise SimulationError("sensor_rate must be positive and latency non-negative")
    plant = plant or FingertipPlant()
    rng = np.random.default_rng(seed)
    n_steps = int(round(duration / dt))
    sample_period = 1.0 / sensor_rate
    eps = 1e-9 * dt

    pending = deque()
    current, current_stamp = np.zeros(3), math.nan
    next_sample = 0.0
    rows = {k: [] for k in ("t", "p", "v", "u", "fc", "flag", "gap", "stamp")}
    touched = False

    for i in range(n_steps + 1):
        t = i * dt
        f_contact, deepest = scene.contact(plant, t)

        if t >= next_sample - eps:
            sensed = _sensed_contact(plant, deepest)
            if sensed is not None and estimator is not None:
                sensed = _estimate(sensed, estimator, rng)
            prox = scene.proximity(plant, t)
            pending.append((t + latency, behavior.command(plant.pose, sensed, prox, t), t))
            next_sample += sample_period
        while pending and pending[0][0] <= t + eps:
            _, current, current_stamp = pending.popleft()

        rows["t"].append(t)
        rows["p"].append(plant.position.copy())
        rows["v"].append(plant.velocity.copy())
        rows["u"].append(current.copy())
        rows["fc"].append(f_contact)
        rows["flag"].append(deepest is not None)
        rows["gap"].append(scene.clearance(plant, t))
        rows["stamp"].append(current_stamp)

        if deepest is not None:
            touched = True
        elif touched and stop_on_release:
            break
        if i == n_steps:
            break
        plant.step(current + f_contact, dt)
        if not np.all(np.isfinite(plant.position)) or np.linalg.norm(plant.position) > bound:
            raise SimulationUnstable(f"fingertip left the {bound} m workspace at t={t:.4f} s")

    return TrajectoryLog(
        np.array(rows["t"]),
        np.array(rows["p"]),
        np.array(rows["v"]),
        np.array(rows["u"]),
        np.array(rows["fc"]),
        np.array(rows["flag"], dtype=bool),
        np.array(rows["gap"]),
        np.array(rows["stamp"]),
    )


def _estimate(sensed, estimator, rng):
    from .estimator import forward
    from .kinematics import ContactAngles
    from .sensor import synthesize_batch

    layout, model, noise_std = estimator
    s = synthesize_batch(layout, sensed.as_target()[None, :], noise_std, rng)
    fx, fy, fz, th, ph = forward(model, s)[0]
    return ContactState(ContactAngles(float(th), float(ph)), ContactForce(float(fx), float(fy), float(fz)))


# --- standard scenarios -----------------------------------------------------


def collision_scene(params=None, dt=1e-5, sensor_rate=None, latency=None):
    """Time-stepped version of the two-mass collision; returns ``(eta, log)``.

    The fingertip (finger mass ``m_r``) hits a wall of stiffness ``k`` at
    ``v0``; the fingertip mass adds its plastic impulse ``m_f v0``. The ratio
    is taken against the same simulation with no control input.
    """
    params = params or CollisionParams()
    rate = sensor_rate or 1.0 / dt
    lat = params.t_l if latency is None else latency
    duration = 20.0 * params.half_period + lat

    def run(behavior):
        wall = SceneObject("plane", center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, -1.0), stiffness=params.k)
        plant = FingertipPlant(mass=params.m_r, position=(0.0, 0.0, -R_SENSOR), velocity=(0.0, 0.0, params.v0))
        log = simulate(Scene([wall]), behavior, duration, dt, plant, rate, lat, stop_on_release=True)
        return params.m_f * params.v0 + log.contact_impulse(dt), log

    i_forced, log = run(CollisionReflex(params.F_in, params.control_sign))
    i_free, _ = run(NoControl())
    return i_forced / i_free, log


def following_scene(duration=5.0, f_des=2.0, latency=0.007, sensor_rate=200.0, dt=1e-3, estimator=None, seed=0):
    """A user-held plane that drifts, oscillates and tilts while the fingertip follows it."""
    k = 1500.0
    motion = Motion(
        velocity=(0.01, 0.0, 0.0), amplitude=(0.0, 0.0, 0.02), frequency=0.4,
        tilt_axis=(0.0, 1.0, 0.0), tilt_amplitude=0.4, tilt_frequency=0.2,
    )
    plane = SceneObject("plane", center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, -1.0), stiffness=k, motion=motion)
    depth = f_des / k
    plant = FingertipPlant(mass=0.1, damping=5.0, position=(0.0, 0.0, -R_SENSOR + depth))
    return simulate(Scene([plane]), ContactFollowing(f_des), duration, dt, plant, sensor_rate, latency, estimator, seed)


def approach_scene(field_on=True, duration=2.0, speed=0.1, d_thresh=80.0, k_field=50.0, latency=0.004, dt=1e-3):
    """A box descends onto the fingertip along the forward-looking rays."""
    box = SceneObject(
        "box", center=(0.0, 0.0, 0.20), half_extents=(0.03, 0.03, 0.03), motion=Motion(velocity=(0.0, 0.0, -speed))
    )
    behavior = PotentialField(d_thresh, k_field) if field_on else NoControl()
    plant = FingertipPlant(mass=0.1, damping=2.0)
    return simulate(Scene([box]), behavior, duration, dt, plant, 200.0, latency)


# --- scenario files ---------------------------------------------------------


def load_scenario(path):
    """Read a JSON scenario: ``{"scene": [...], "behavior": {...}, "plant": {...}, "sim": {...}}``."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SimulationError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc, str(path))


def scenario_from_dict(doc, where="scenario"):
    try:
        objects = []
        for j, o in enumerate(doc.get("scene", [])):
            o = dict(o)
            motion = Motion(**o.pop("motion", {}))
            objects.append(SceneObject(motion=motion, **o))
        beh = dict(doc.get("behavior", {"name": "none"}))
        behavior = make_behavior(beh.pop("name"), **beh)
        plant = FingertipPlant(**doc.get("plant", {}))
        sim = dict(doc.get("sim", {}))
    except TypeError as exc:
        raise SimulationError(f"{where}: {exc}") from None
    return Scene(objects), behavior, plant, sim
