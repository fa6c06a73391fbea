"""Synthetic barometer array and the bowl data-collection protocol.

The rubber's pressure transfer is not something we can derive, so the
simulator uses a documented stand-in. For sensor ``i`` with outward unit
direction ``d_i`` and a contact at normal ``n`` with contact-frame force
``(fx, fy, fz)``::

    c_i = d_i . n                                    # cosine of the geodesic angle
    g_i = ((1 + c_i) / 2) ** q                       # normal-load kernel
    u_i = d_i - c_i n                                # sensor offset, tangent to the contact
    t   = R[:, :2] @ (fx, fy)                        # shear in the base frame
    s_i = w_n g_i |fz| + w_s ((1 + c_i) / 2) ** p (t . u_i) + noise, then quantized

``t . u_i`` equals ``|shear| * h_i`` with ``h_i = cos(shear dir, offset) * sin(angle)``,
so shear pushing toward a sensor raises its reading and shear pushing away
lowers it. The kernels only vanish at the antipode, so every contact in the
180 x 90 degree domain reaches at least five sensors. The shear term decays
much more slowly with distance than the normal term (``p`` well below ``q``);
with equal decay a shear load looks almost exactly like a small shift of the
contact point and the inverse problem becomes ill-conditioned. All constants
live in :class:`ForwardModelConfig`.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import fmt
from .kinematics import (
    NORMAL_MAX,
    PHI_RANGE,
    SHEAR_MAX,
    THETA_RANGE,
    ContactAngles,
    ContactForce,
    contact_normal,
    contact_rotation,
)

DEG = math.pi / 180.0

PHI_BANDS = ((-135 * DEG, -45 * DEG), (-90 * DEG, 0.0), (-45 * DEG, 45 * DEG))
"""The three overlapping 90-degree cones covered by the three mounting orientations."""


class SensorDomainError(ValueError):
    pass


@dataclass(frozen=True)
class PressureSensorLayout:
    """Unit directions of the 8 barometers and the board each one sits on."""

    directions: np.ndarray
    boards: tuple

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (8, 3):
            raise ValueError("layout needs exactly 8 sensor directions")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12):
            raise ValueError("sensor directions must be unit vectors")
        if sorted(self.boards) != ["A"] * 4 + ["B"] * 4:
            raise ValueError("expected 4 sensors on board A and 4 on board B")
        gaps = np.linalg.norm(d[:, None, :] - d[None, :, :], axis=2) + np.eye(8)
        if gaps.min() < 1e-9:
            raise ValueError("sensor directions must be pairwise distinct")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "boards", tuple(self.boards))

    @classmethod
    def default(cls):
        """Two perpendicular boards of four sensors each.

        Board A faces the base +z axis (``phi = 0``), board B faces -x
        (``phi = -90 deg``). On each board the sensors sit 25 degrees off the
        board axis in ``theta`` and 20 degrees in ``phi``. The real mounting
        positions are unpublished; this is an assumption.
        """
        dirs, boards = [], []
        for board, phi_c in (("A", 0.0), ("B", -90.0)):
            for dth in (-25.0, 25.0):
                for dph in (-20.0, 20.0):
                    dirs.append(contact_normal(ContactAngles(dth * DEG, (phi_c + dph) * DEG)))
                    boards.append(board)
        return cls(np.array(dirs), tuple(boards))

    def to_dict(self):
        return {"directions": self.directions.tolist(), "boards": list(self.boards)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["directions"], dtype=float), tuple(d["boards"]))

    def digest(self):
        text = ",".join(fmt(v, 12) for v in self.directions.ravel()) + "|" + "".join(self.boards)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ForwardModelConfig:
    kernel_power: float = 8.0
    shear_kernel_power: float = 0.0
    normal_gain: float = 1.0 / 25.0
    shear_gain: float = 1.0 / 20.0
    full_scale: float = 2.0
    adc_levels: int = 4096
    friction: float = 1.0

    @property
    def quantum(self):
        return self.full_scale / self.adc_levels


@dataclass(frozen=True)
class ContactState:
    angles: ContactAngles
    force: ContactForce

    def as_target(self):
        """The 5-vector ``[Fx, Fy, Fz, theta, phi]``."""
        f = self.force
        return np.array([f.fx, f.fy, f.fz, self.angles.theta, self.angles.phi])

    def in_domain(self):
        return self.angles.in_training_domain() and self.force.in_training_domain()


@dataclass(frozen=True)
class PressureSample:
    values: np.ndarray
    timestamp: float = 0.0


def _response(layout, normals, rotations, forces, cfg):
    # Vectorized noiseless channel model; normals (n, 3), rotations (n, 3, 3), forces (n, 3).
    cosang = normals @ layout.directions.T
    half = 0.5 * (1.0 + cosang)
    offsets = layout.directions[None, :, :] - cosang[:, :, None] * normals[:, None, :]
    shear = np.einsum("nij,nj->ni", rotations[:, :, :2], forces[:, :2])
    coupling = np.einsum("nsk,nk->ns", offsets, shear)
    return (
        cfg.normal_gain * half**cfg.kernel_power * np.abs(forces[:, 2:3])
        + cfg.shear_gain * half**cfg.shear_kernel_power * coupling
    )


def quantize(values, cfg=ForwardModelConfig()):
    q = cfg.quantum
    return np.round(np.asarray(values) / q) * q


def synthesize(layout, state, noise_std=0.0, rng=None, cfg=ForwardModelConfig(), timestamp=0.0):
    """Pressure readings for one contact state (noise, then quantization)."""
    if not state.in_domain():
        raise SensorDomainError(f"contact state outside the training domain: {state}")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    normal = contact_normal(state.angles)[None, :]
    rot = contact_rotation(state.angles)[None, :, :]
    s = _response(layout, normal, rot, state.force.as_array()[None, :], cfg)[0]
    if noise_std > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_std > 0")
        s = s + rng.normal(0.0, noise_std, size=8)
    return PressureSample(quantize(s, cfg), timestamp)


def synthesize_batch(layout, targets, noise_std=0.0, rng=None, cfg=ForwardModelConfig(), quantized=True):
    """Vectorized :func:`synthesize` for an ``(n, 5)`` array of targets (no domain check)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    th, ph = targets[:, 3], targets[:, 4]
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    zero, one = np.zeros_like(th), np.ones_like(th)
    rx = np.stack([one, zero, zero, zero, ct, -st, zero, st, ct], axis=1).reshape(-1, 3, 3)
    ry = np.stack([cp, zero, sp, zero, one, zero, -sp, zero, cp], axis=1).reshape(-1, 3, 3)
    rot = ry @ rx
    s = _response(layout, rot[:, :, 2], rot, targets[:, :3], cfg)
    if noise_std > 0:
        s = s + rng.normal(0.0, noise_std, size=s.shape)
    return quantize(s, cfg) if quantized else s


def asterisk_trajectory(patch, layers=3, rays=8, points_per_ray=10, mu=1.0):
    """Contact states of one layered asterisk at a fixed bowl patch.

    Normal force steps through ``layers`` levels down to -25 N. At each level
    the shear runs out and back along ``rays`` evenly spaced directions with a
    triangular 0 -> 15 -> 0 N magnitude profile, clipped to ``mu * |fz|``.
    The contact angles never change.
    """
    if layers < 1 or rays < 1 or points_per_ray < 1:
        raise ValueError("layers, rays and points_per_ray must be >= 1")
    if points_per_ray == 1:
        ramp = np.zeros(1)
    else:
        ramp = SHEAR_MAX * (1.0 - np.abs(np.linspace(-1.0, 1.0, points_per_ray)))
    states = []
    for j in range(1, layers + 1):
        fz = -NORMAL_MAX * j / layers
        for r in range(rays):
            ang = 2.0 * math.pi * r / rays
            for mag in np.minimum(ramp, mu * abs(fz)):
                fx, fy = mag * math.cos(ang), mag * math.sin(ang)
                states.append(ContactState(patch, ContactForce(fx, fy, fz)))
    return states


def patch_grid(n_theta=5, n_phi=5, bands=PHI_BANDS):
    """Bowl patches: an ``n_theta x n_phi`` grid inside each of the three phi bands."""
    thetas = np.linspace(THETA_RANGE[0], THETA_RANGE[1], n_theta)
    patches = []
    for lo, hi in bands:
        for ph in np.linspace(lo, hi, n_phi):
            for th in thetas:
                patches.append(ContactAngles(float(th), float(ph)))
    return patches


@dataclass
class LabeledDataset:
    """Pressure inputs, ``[Fx, Fy, Fz, theta, phi]`` targets and a train/test mask."""

    inputs: np.ndarray
    targets: np.ndarray
    train_mask: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.inputs)
        if n == 0:
            raise ValueError("dataset is empty")
        if self.inputs.shape != (n, 8) or self.targets.shape != (n, 5) or self.train_mask.shape != (n,):
            raise ValueError("inconsistent dataset array shapes")
        self.metadata.setdefault("record_count", n)

    def __len__(self):
        return len(self.inputs)

    def split(self, name):
        """``(inputs, targets)`` of the ``"train"`` or ``"test"`` split."""
        if name == "train":
            m = self.train_mask
        elif name == "test":
            m = ~self.train_mask
        else:
            raise ValueError(f"unknown split {name!r}")
        return self.inputs[m], self.targets[m]

    def records(self):
        for s, t, tr in zip(self.inputs, self.targets, self.train_mask):
            yield {
                "s": s.tolist(),
                "f": t[:3].tolist(),
                "a": t[3:].tolist(),
                "split": "train" if tr else "test",
            }


def generate_dataset(
    layout=None,
    patches=None,
    layers=3,
    rays=8,
    points_per_ray=10,
    samples_per_state=2,
    noise_std=0.02,
    seed=0,
    train_fraction=0.9,
    cfg=ForwardModelConfig(),
):
    """Run the bowl protocol through the forward model and return a shuffled, split dataset.

    Each patch draws its noise from its own stream seeded by ``(seed, patch
    index)``; the final shuffle and the 90/10 split use ``seed`` alone.
    The defaults give the desk-scale set of 36,000 records (75 patches x
    3 layers x 8 rays x 10 points x 2 noisy samples) at noise level 0.02,
    about 1% of the largest channel reading.
    """
    layout = layout or PressureSensorLayout.default()
    patches = patch_grid() if patches is None else list(patches)
    if not patches:
        raise ValueError("no patches given")

    blocks_in, blocks_tg = [], []
    for idx, patch in enumerate(patches):
        if not patch.in_training_domain():
            raise SensorDomainError(
                f"patch {idx} (theta={patch.theta / DEG:.2f} deg, phi={patch.phi / DEG:.2f} deg) "
                "is outside the training domain"
            )
        states = asterisk_trajectory(patch, layers, rays, points_per_ray, cfg.friction)
        tg = np.array([s.as_target() for s in states])
        tg = np.repeat(tg, samples_per_state, axis=0)
        rng = np.random.default_rng([seed, idx])
        blocks_in.append(synthesize_batch(layout, tg, noise_std, rng, cfg))
        blocks_tg.append(tg)

    inputs = np.concatenate(blocks_in)
    targets = np.concatenate(blocks_tg)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(inputs))
    n_train = int(round(train_fraction * len(inputs)))
    mask = np.zeros(len(inputs), dtype=bool)
    mask[:n_train] = True

    metadata = {
        "seed": seed,
        "noise_std": noise_std,
        "layers": layers,
        "rays": rays,
        "points_per_ray": points_per_ray,
        "samples_per_state": samples_per_state,
        "train_fraction": train_fraction,
        "patches": [[p.theta, p.phi] for p in patches],
        "layout": layout.to_dict(),
        "layout_hash": layout.digest(),
        "constants": asdict(cfg),
        "record_count": len(inputs),
    }
    return LabeledDataset(inputs[order], targets[order], mask, metadata)


def regenerate(metadata):
    """Rebuild a dataset from its metadata."""
    return generate_dataset(
        layout=PressureSensorLayout.from_dict(metadata["layout"]),
        patches=[ContactAngles(th, ph) for th, ph in metadata["patches"]],
        layers=metadata["layers"],
        rays=metadata["rays"],
        points_per_ray=metadata["points_per_ray"],
        samples_per_state=metadata["samples_per_state"],
        noise_std=metadata["noise_std"],
        seed=metadata["seed"],
        train_fraction=metadata["train_fraction"],
        cfg=ForwardModelConfig(**metadata["constants"]),
    )


def _record_line(rec):
    nums = lambda xs: "[" + ",".join(fmt(x) for x in xs) + "]"  # noqa: E731
    return f'{{"s":{nums(rec["s"])},"f":{nums(rec["f"])},"a":{nums(rec["a"])},"split":"{rec["split"]}"}}'


def save_dataset(ds, path):
    """Write ``path`` as JSON lines plus a ``<path>.meta.json`` sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in ds.records():
            fh.write(_record_line(rec) + "\n")
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(json.dumps(ds.metadata, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path, meta_path


def load_dataset(path):
    """Read a JSON-lines dataset (and its sidecar metadata if present)."""
    path = Path(path)
    inputs, targets, mask = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                s, f, a, split = rec["s"], rec["f"], rec["a"], rec["split"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record ({exc})") from None
            if len(s) != 8 or len(f) != 3 or len(a) != 2 or split not in ("train", "test"):
                raise ValueError(f"{path}:{lineno}: record does not match the dataset schema")
            inputs.append(s)
            targets.append(list(f) + list(a))
            mask.append(split == "train")
    meta_path = path.with_name(path.name + ".meta.json")
    metadata = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    return LabeledDataset(
        np.array(inputs, dtype=float).reshape(-1, 8),
        np.array(targets, dtype=float).reshape(-1, 5),
        np.array(mask, dtype=bool),
        metadata,
    )
