"""Coarse maps from proximity rays and contact estimates.

Proximity readings taken while the finger moves freely become world points
along the time-of-flight rays. Contacts add the world contact location with
its normal. Points are binned into an axis-aligned grid of coarse cells.

The module also carries a tiny ray caster over axis-aligned boxes, used to
script synthetic rooms and objects for demos and tests.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ._io import read_csv, write_csv
from .kinematics import RigidTransform, contact_normal, contact_transform

PROX_MIN_MM = 10.0
PROX_MAX_MM = 150.0
CONTACT_THRESHOLD_N = 1.58


class MappingError(ValueError):
    pass


class BelowContactThreshold(MappingError):
    """The estimated normal force is too small to trust the contact."""


@dataclass(frozen=True)
class ProximityLayout:
    """Mounting of the five time-of-flight sensors in the sensor base frame.

    ``origins`` are in metres, ``directions`` are unit vectors. The default
    assumes two sensors looking along +z beside the dome, two along -x and
    one on the back surface along +x (three outward directions in all).
    Real mounting offsets are unpublished.
    """

    origins: np.ndarray
    directions: np.ndarray

    @classmethod
    def default(cls):
        origins = np.array(
            [
                [0.004, 0.008, 0.012],
                [0.004, -0.008, 0.012],
                [-0.012, 0.008, -0.004],
                [-0.012, -0.008, -0.004],
                [0.011, 0.0, -0.006],
            ]
        )
        directions = np.array(
            [[0, 0, 1], [0, 0, 1], [-1, 0, 0], [-1, 0, 0], [1, 0, 0]], dtype=float
        )
        return cls(origins, directions)


DEFAULT_PROXIMITY_LAYOUT = ProximityLayout.default()


@dataclass
class ProximityArray:
    """Five distance readings in millimetres; NaN or anything outside 10-150 mm is out of range."""

    readings: np.ndarray
    layout: ProximityLayout = field(default_factory=lambda: DEFAULT_PROXIMITY_LAYOUT)

    def __post_init__(self):
        self.readings = np.asarray(self.readings, dtype=float).reshape(5)

    @property
    def in_range(self):
        r = self.readings
        with np.errstate(invalid="ignore"):
            return np.isfinite(r) & (r >= PROX_MIN_MM) & (r <= PROX_MAX_MM)


@dataclass(frozen=True)
class FingertipPose:
    transform: RigidTransform
    timestamp: float = 0.0


@dataclass(frozen=True)
class MapPoint:
    position: np.ndarray
    kind: str
    normal: np.ndarray | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("proximity", "contact"):
            raise MappingError(f"unknown map point kind {self.kind!r}")
        if (self.kind == "contact") != (self.normal is not None):
            raise MappingError("contact points carry a normal, proximity points do not")

    @property
    def surface_normal(self):
        """Outward normal of the touched object: opposite the sensor's contact normal."""
        return None if self.normal is None else -self.normal


def project_proximity(pose, array):
    """World points hit by the in-range proximity rays."""
    tf = pose.transform
    ok = array.in_range
    lay = array.layout
    ends = lay.origins[ok] + lay.directions[ok] * (array.readings[ok, None] / 1000.0)
    return [MapPoint(p, "proximity", None, pose.timestamp) for p in tf.apply(ends)]


def project_contact(pose, state, threshold=CONTACT_THRESHOLD_N):
    """World contact point, with the sensor's contact normal rotated into the world.

    Raises:
        BelowContactThreshold: ``|fz|`` of the estimate is below ``threshold``.
    """
    if abs(state.force.fz) < threshold:
        raise BelowContactThreshold(
            f"normal force {abs(state.force.fz):.3g} N is below the {threshold} N contact threshold"
        )
    tf = pose.transform
    local = contact_transform(state.angles)
    return MapPoint(
        tf.apply(local.translation), "contact", tf.rotate(contact_normal(state.angles)), pose.timestamp
    )


class CoarseGrid:
    """Hit counts per cubic cell, kept separately for proximity and contact points."""

    def __init__(self, lower, upper, cell=0.01):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != (3,) or self.upper.shape != (3,) or np.any(self.upper <= self.lower):
            raise MappingError("grid bounds must be 3-vectors with upper > lower")
        if not cell > 0:
            raise MappingError("cell size must be positive")
        self.cell = float(cell)
        self.shape = tuple(int(n) for n in np.ceil((self.upper - self.lower) / self.cell - 1e-9))
        self.counts = {}
        self.out_of_bounds = 0

    def index(self, position):
        """Cell index of a point, or None if it lies outside the bounds."""
        p = np.asarray(position, dtype=float)
        if np.any(p < self.lower) or np.any(p > self.upper):
            return None
        idx = np.floor((p - self.lower) / self.cell).astype(int)
        idx = np.minimum(idx, np.array(self.shape) - 1)
        return tuple(int(i) for i in idx)

    def center(self, idx):
        return self.lower + (np.asarray(idx) + 0.5) * self.cell

    def insert(self, points):
        for pt in points:
            idx = self.index(pt.position)
            if idx is None:
                self.out_of_bounds += 1
                continue
            cnt = self.counts.setdefault(idx, {"proximity": 0, "contact": 0})
            cnt[pt.kind] += 1
        return self

    def occupied(self, kind=None):
        if kind is None:
            return set(self.counts)
        return {i for i, c in self.counts.items() if c[kind] > 0}

    def to_csv(self, path=None):
        rows = []
        for idx in sorted(self.counts):
            c = self.center(idx)
            rows.append([*idx, float(c[0]), float(c[1]), float(c[2]), self.counts[idx]["proximity"], self.counts[idx]["contact"]])
        return write_csv(path, ["ix", "iy", "iz", "x_m", "y_m", "z_m", "proximity_hits", "contact_hits"], rows)


def rasterize(points, lower, upper, cell=0.01):
    return CoarseGrid(lower, upper, cell).insert(points)


def points_to_csv(points, path=None):
    rows = []
    for p in points:
        n = p.normal if p.normal is not None else (math.nan,) * 3
        rows.append([float(p.timestamp), *map(float, p.position), p.kind, *map(float, n)])
    return write_csv(path, ["t_s", "x_m", "y_m", "z_m", "kind", "nx", "ny", "nz"], rows)


# --- log files --------------------------------------------------------------


def read_pose_log(path):
    """``t_s,qw,qx,qy,qz,tx,ty,tz`` rows as a list of :class:`FingertipPose`."""
    header, rows = read_csv(path)
    expected = ["t_s", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]
    if header != expected:
        raise MappingError(f"{path}: expected header {','.join(expected)}")
    poses = []
    for lineno, r in enumerate(rows, 2):
        try:
            t, qw, qx, qy, qz, tx, ty, tz = map(float, r)
        except ValueError as exc:
            raise MappingError(f"{path}:{lineno}: {exc}") from None
        rot = Rotation.from_quat([qx, qy, qz, qw]).as_matrix()
        poses.append(FingertipPose(RigidTransform(rot, np.array([tx, ty, tz])), t))
    return poses


def write_pose_log(poses, path=None):
    rows = []
    for p in poses:
        qx, qy, qz, qw = Rotation.from_matrix(p.transform.rotation).as_quat()
        rows.append([float(p.timestamp), float(qw), float(qx), float(qy), float(qz), *map(float, p.transform.translation)])
    return write_csv(path, ["t_s", "qw", "qx", "qy", "qz", "tx", "ty", "tz"], rows)


def read_proximity_log(path):
    """``t_s,d1..d5`` rows (mm, -1 for out of range) as ``(times, readings)``."""
    header, rows = read_csv(path)
    expected = ["t_s", "d1", "d2", "d3", "d4", "d5"]
    if header != expected:
        raise MappingError(f"{path}: expected header {','.join(expected)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 6)
    except ValueError as exc:
        raise MappingError(f"{path}: {exc}") from None
    readings = data[:, 1:]
    readings[readings < 0] = np.nan
    return data[:, 0], readings


def write_proximity_log(times, readings, path=None):
    rows = []
    for t, r in zip(times, readings):
        rows.append([float(t)] + [float(v) if np.isfinite(v) else -1.0 for v in r])
    return write_csv(path, ["t_s", "d1", "d2", "d3", "d4", "d5"], rows)


def read_contact_log(path):
    """``t_s,fx,fy,fz,theta,phi`` rows as ``(times, targets)``."""
    header, rows = read_csv(path)
    expected = ["t_s", "fx", "fy", "fz", "theta", "phi"]
    if header != expected:
        raise MappingError(f"{path}: expected header {','.join(expected)}")
    data = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 6)
    return data[:, 0], data[:, 1:]


def write_contact_log(times, targets, path=None):
    return write_csv(path, ["t_s", "fx", "fy", "fz", "theta", "phi"], [[float(t), *map(float, y)] for t, y in zip(times, targets)])


# --- synthetic scenes -------------------------------------------------------


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple
    name: str = ""

    def contains(self, p, margin=0.0):
        p = np.asarray(p)
        return bool(np.all(p >= np.asarray(self.lower) - margin) and np.all(p <= np.asarray(self.upper) + margin))


def ray_box(origin, direction, box):
    """Distance along a unit ray to the first hit with an axis-aligned box.

    0 if the origin is inside the box, inf if the ray misses it.
    """
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / direction
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    tmin = np.max(np.minimum(t1, t2))
    tmax = np.min(np.maximum(t1, t2))
    if tmax < max(tmin, 0.0):
        return math.inf
    return max(float(tmin), 0.0)


def simulate_proximity(pose, boxes, layout=DEFAULT_PROXIMITY_LAYOUT):
    """Noiseless time-of-flight readings (mm) from a pose inside a scene of boxes."""
    tf = pose.transform
    origins = tf.apply(layout.origins)
    dirs = tf.rotate(layout.directions)
    out = np.full(5, np.nan)
    for i in range(5):
        d = min((ray_box(origins[i], dirs[i], b) for b in boxes), default=math.inf)
        mm = d * 1000.0
        if PROX_MIN_MM <= mm <= PROX_MAX_MM:
            out[i] = mm
    return ProximityArray(out, layout)


def three_wall_room():
    """Room with back, left and right walls plus two boxes standing in front of the back wall."""
    walls = [
        Box((-0.16, 0.20, 0.0), (0.16, 0.21, 0.10), "back"),
        Box((-0.17, 0.0, 0.0), (-0.16, 0.21, 0.10), "left"),
        Box((0.16, 0.0, 0.0), (0.17, 0.21, 0.10), "right"),
    ]
    objects = [
        Box((-0.09, 0.13, 0.0), (-0.05, 0.17, 0.08), "object_1"),
        Box((0.04, 0.12, 0.0), (0.08, 0.16, 0.08), "object_2"),
    ]
    return walls, objects


def sweep_poses(y_rows=(0.04, 0.07), z_rows=(0.03, 0.05), x_range=(-0.13, 0.13), n=80, dt=0.01):
    """Back-and-forth sweep with the sensor's +z axis facing world +y."""
    rot = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    poses, t = [], 0.0
    for j, (y, z) in enumerate((y, z) for z in z_rows for y in y_rows):
        xs = np.linspace(*x_range, n)
        if j % 2:
            xs = xs[::-1]
        for x in xs:
            poses.append(FingertipPose(RigidTransform(rot, np.array([x, y, z])), t))
            t += dt
    return poses


def map_scene(poses, boxes, lower=(-0.2, -0.05, -0.05), upper=(0.2, 0.25, 0.15), cell=0.01):
    """Sweep a scene and rasterize every proximity hit."""
    points = []
    for pose in poses:
        points.extend(project_proximity(pose, simulate_proximity(pose, boxes)))
    return rasterize(points, lower, upper, cell), points


def tap_pose(face_point, face_normal, angles, spin=0.0):
    """Fingertip pose that touches ``face_point`` at contact angles ``angles``.

    The sensor's contact normal is aligned against the face's outward normal
    and the base frame is spun by ``spin`` radians about that axis.
    """
    face_normal = np.asarray(face_normal, dtype=float)
    face_normal = face_normal / np.linalg.norm(face_normal)
    n_s = contact_normal(angles)
    align, _ = Rotation.align_vectors([-face_normal], [n_s])
    rot = (Rotation.from_rotvec(spin * -face_normal) * align).as_matrix()
    p_local = contact_transform(angles).translation
    return RigidTransform(rot, np.asarray(face_point, dtype=float) - rot @ p_local)
