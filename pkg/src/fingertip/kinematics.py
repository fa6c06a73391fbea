"""Contact location on the spherical fingertip and the contact frame.

A contact is located by two angles: ``theta`` rotates about the base x-axis
first, then ``phi`` rotates about the base y-axis. The contact frame is

    T_base,contact = Rot_y(phi) @ Rot_x(theta) @ Trans(0, 0, r_sensor)

so its z-axis is the outward surface normal and its origin sits on the sphere.
``T`` maps contact-frame coordinates into the base frame.
"""

import math
from dataclasses import dataclass

import numpy as np

R_SENSOR = 0.010
"""Sensor dome radius in metres."""

THETA_RANGE = (-math.pi / 4, math.pi / 4)
PHI_RANGE = (-3 * math.pi / 4, math.pi / 4)
SHEAR_MAX = 15.0
NORMAL_MAX = 25.0
"""Training-domain bounds: angles in radians, forces in newtons."""


class KinematicsError(ValueError):
    pass


class GimbalDegeneracyError(KinematicsError):
    """The point lies on the ``theta = +-pi/2`` meridian where ``phi`` is undefined."""


@dataclass(frozen=True)
class ContactAngles:
    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise KinematicsError("contact angles must be finite")

    def in_training_domain(self, tol=1e-12):
        return (
            THETA_RANGE[0] - tol <= self.theta <= THETA_RANGE[1] + tol
            and PHI_RANGE[0] - tol <= self.phi <= PHI_RANGE[1] + tol
        )

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg):
        return cls(math.radians(theta_deg), math.radians(phi_deg))


@dataclass(frozen=True)
class ContactForce:
    """Force in the contact frame; ``fz`` is the normal component (pressing is negative)."""

    fx: float
    fy: float
    fz: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.fx, self.fy, self.fz)):
            raise KinematicsError("contact force must be finite")

    def as_array(self):
        return np.array([self.fx, self.fy, self.fz])

    def in_training_domain(self, tol=1e-9):
        return (
            abs(self.fx) <= SHEAR_MAX + tol
            and abs(self.fy) <= SHEAR_MAX + tol
            and -NORMAL_MAX - tol <= self.fz <= tol
        )


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        trans = np.asarray(self.translation, dtype=float)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise KinematicsError("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
            raise KinematicsError("transform must be finite")
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-12 or abs(np.linalg.det(rot) - 1.0) > 1e-12:
            raise KinematicsError("rotation is not orthonormal with det +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points):
        """Map points (``(3,)`` or ``(n, 3)``) from the local frame into the parent frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def rotate(self, vectors):
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def compose(self, other):
        """``self @ other``: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def contact_rotation(angles):
    return rot_y(angles.phi) @ rot_x(angles.theta)


def contact_transform(angles, r_sensor=R_SENSOR):
    """Pose of the contact frame in the sensor base frame."""
    if not (r_sensor > 0 and math.isfinite(r_sensor)):
        raise KinematicsError("r_sensor must be positive and finite")
    rot = contact_rotation(angles)
    return RigidTransform(rot, rot @ np.array([0.0, 0.0, r_sensor]))


def contact_normal(angles):
    """Outward unit normal at the contact (z-axis of the contact frame)."""
    ct, st = math.cos(angles.theta), math.sin(angles.theta)
    cp, sp = math.cos(angles.phi), math.sin(angles.phi)
    return np.array([sp * ct, -st, cp * ct])


def force_to_base(angles, force):
    """Re-express a contact-frame force in the base frame."""
    f = force.as_array() if isinstance(force, ContactForce) else np.asarray(force, dtype=float)
    return contact_rotation(angles) @ f


def angles_from_point(p, r_sensor=R_SENSOR, tol=1e-6):
    """Invert the contact translation: find ``(theta, phi)`` for a point on the sphere.

    ``theta`` is taken in ``(-pi/2, pi/2)``, which makes the answer unique.

    Raises:
        KinematicsError: the point is more than ``tol`` metres off the sphere.
        GimbalDegeneracyError: the point is at ``(0, +-r, 0)``.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise KinematicsError("point must be a finite 3-vector")
    norm = float(np.linalg.norm(p))
    if abs(norm - r_sensor) > tol:
        raise KinematicsError(f"point is {abs(norm - r_sensor):.3g} m off the sensor sphere")
    x, y, z = p / norm
    horiz = math.hypot(x, z)
    if horiz < 1e-12:
        raise GimbalDegeneracyError("phi is undefined at theta = +-pi/2")
    theta = math.atan2(-y, horiz)
    phi = math.atan2(x, z)
    return ContactAngles(theta, phi)
