"""Motion-data simulator: 2D paths on 3D surfaces, rigid sensor rigs, noise.

A 2D path is resampled at a fixed step length and projected onto a height
field.  The surface normal gives each pose's z-axis and the horizontal
path tangent (after Gram-Schmidt against the normal) its x-axis.  From the
resulting 6-DOF pose sequence, incremental motions for a pair of rigidly
mounted sensors are generated, optionally perturbed by zero-mean Gaussian
noise specified either absolutely or relative to the average motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .cost import MotionPair
from .dualquat import DualQuat, quat_mul
from .errors import DegeneratePath
from .planar import GroundPlane, transform_plane


# -- surfaces ---------------------------------------------------------------

@dataclass(frozen=True)
class SinusoidTerm:
    amplitude: float
    wavelength: float
    axis: str = "x"  # "x" or "y"
    phase: float = 0.0


DEFAULT_SURFACE_TERMS = (
    SinusoidTerm(amplitude=0.5, wavelength=20.0, axis="x"),
    SinusoidTerm(amplitude=0.2, wavelength=7.0, axis="y"),
)


def surface_from_spec(spec) -> tuple[Callable, Callable]:
    """Return (height, gradient) callables for a surface spec.

    ``spec`` is None or {"kind": "flat"} for a flat surface, or
    {"kind": "sinusoid", "terms": [{amplitude, wavelength, axis, phase}, ...]}.
    """
    if spec is None or (isinstance(spec, dict) and spec.get("kind") == "flat"):
        return (lambda x, y: 0.0 * x, lambda x, y: (0.0 * x, 0.0 * y))
    if isinstance(spec, dict) and spec.get("kind") == "sinusoid":
        raw = spec.get("terms")
        terms = DEFAULT_SURFACE_TERMS if raw is None else tuple(
            SinusoidTerm(**t) for t in raw)

        def height(x, y):
            z = 0.0 * x
            for t in terms:
                u = x if t.axis == "x" else y
                z = z + t.amplitude * np.sin(2 * np.pi * u / t.wavelength + t.phase)
            return z

        def gradient(x, y):
            gx = 0.0 * x
            gy = 0.0 * y
            for t in terms:
                u = x if t.axis == "x" else y
                g = (t.amplitude * 2 * np.pi / t.wavelength
                     * np.cos(2 * np.pi * u / t.wavelength + t.phase))
                if t.axis == "x":
                    gx = gx + g
                else:
                    gy = gy + g
            return gx, gy

        return height, gradient
    raise ValueError(f"unknown surface spec: {spec!r}")


# -- 2D paths ---------------------------------------------------------------

def _dense_path_2d(path_spec, n_steps: int, step_length: float) -> np.ndarray:
    total = n_steps * step_length
    if isinstance(path_spec, dict):
        kind = path_spec.get("kind")
        if kind == "circle":
            radius = float(path_spec.get("radius", 12.0))
            # 5% parameter margin: the chord length of the dense polyline is
            # slightly below the arc length
            phi = np.linspace(0.0, 1.05 * total / radius, 20 * n_steps + 1)
            return np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])
        if kind == "lissajous":
            ax = float(path_spec.get("ax", 12.0))
            ay = float(path_spec.get("ay", 8.0))
            fx = float(path_spec.get("fx", 1.0))
            fy = float(path_spec.get("fy", 2.0))
            # generous parameter span so the curve is long enough to resample
            span = 1.5 * total / max(ax * fx, ay * fy)
            s = np.linspace(0.0, span, 40 * n_steps + 1)
            pts = np.column_stack([ax * np.sin(fx * s), ay * np.sin(fy * s + 0.5)])
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
            while seg < 1.05 * total:
                span *= 1.5
                s = np.linspace(0.0, span, 40 * n_steps + 1)
                pts = np.column_stack([ax * np.sin(fx * s), ay * np.sin(fy * s + 0.5)])
                seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
            return pts
        if kind == "waypoints":
            return np.asarray(path_spec["points"], dtype=float)
        raise ValueError(f"unknown path kind: {kind!r}")
    return np.asarray(path_spec, dtype=float)


def _resample_by_arclength(points: np.ndarray, step_length: float,
                           n_steps: int) -> np.ndarray:
    seg = np.diff(points, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    if np.any(seg_len < 1e-12):
        raise DegeneratePath("consecutive waypoints coincide")
    s = np.concatenate([[0.0], np.cumsum(seg_len)])
    wanted = np.arange(n_steps + 1) * step_length
    if wanted[-1] > s[-1] + 1e-9:
        raise DegeneratePath(
            f"path length {s[-1]:.3f} m shorter than requested "
            f"{wanted[-1]:.3f} m")
    x = np.interp(wanted, s, points[:, 0])
    y = np.interp(wanted, s, points[:, 1])
    return np.column_stack([x, y])


# -- configuration and pose generation ---------------------------------------

@dataclass(frozen=True)
class SimConfig:
    path: object = field(default_factory=lambda: {"kind": "circle", "radius": 12.0})
    surface: object = field(default_factory=lambda: {"kind": "sinusoid"})
    step_length: float = 1.0
    n_steps: int = 100
    true_calib: DualQuat | None = None
    noise_level: object = 0.0  # fraction, or (sigma_trans_m, sigma_rot_rad)
    seed: int = 0
    rate: float = 10.0

    def __post_init__(self):
        if self.step_length <= 0:
            raise ValueError("step_length must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        level = self.noise_level
        if isinstance(level, (int, float)):
            if level < 0:
                raise ValueError("noise level must be nonnegative")
        else:
            st, sr = level
            if st < 0 or sr < 0:
                raise ValueError("noise sigmas must be nonnegative")


@dataclass(frozen=True)
class PoseSequence:
    times: np.ndarray
    poses: tuple[DualQuat, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self):
        return len(self.poses)


def generate_path(config: SimConfig) -> PoseSequence:
    """6-DOF poses along the configured path projected onto the surface."""
    height, gradient = surface_from_spec(config.surface)
    dense = _dense_path_2d(config.path, config.n_steps, config.step_length)
    xy = _resample_by_arclength(dense, config.step_length, config.n_steps)

    tangents = np.empty_like(xy)
    tangents[:-1] = xy[1:] - xy[:-1]
    tangents[-1] = tangents[-2] if len(xy) > 1 else np.array([1.0, 0.0])

    poses = []
    for (x, y), tan in zip(xy, tangents):
        gx, gy = gradient(x, y)
        normal = np.array([-gx, -gy, 1.0])
        normal /= np.linalg.norm(normal)
        t3 = np.array([tan[0], tan[1], 0.0])
        nt = np.linalg.norm(t3)
        if nt < 1e-12:
            raise DegeneratePath("zero path tangent")
        t3 /= nt
        x_axis = t3 - (t3 @ normal) * normal
        x_axis /= np.linalg.norm(x_axis)
        y_axis = np.cross(normal, x_axis)
        R = np.column_stack([x_axis, y_axis, normal])
        T = np.eye(4)
        T[:3, :3] = R
        T[:3, 3] = (x, y, float(height(x, y)))
        poses.append(DualQuat.from_homogeneous(T))
    times = np.arange(len(poses)) / config.rate
    return PoseSequence(times=times, poses=tuple(poses))


def sensor_pair_motions(poses: PoseSequence, true_calib: DualQuat) -> list[MotionPair]:
    """Incremental motion pairs of two sensors rigidly related by ``true_calib``.

    The pose sequence is sensor A's; sensor B moves rigidly attached with
    calibration ``true_calib`` (mapping B coordinates into A).  Every pair
    then satisfies q_a * q_T = q_T * q_b exactly.
    """
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    qt = true_calib.normalized().canonicalized()
    qt_inv = qt.conjugate()
    pairs = []
    for i in range(len(poses) - 1):
        v_a = (poses.poses[i].conjugate() * poses.poses[i + 1]).canonicalized()
        v_b = (qt_inv * v_a * qt).canonicalized()
        pairs.append(MotionPair(q_a=v_a, q_b=v_b, timestamp=float(poses.times[i + 1])))
    return pairs


# -- noise --------------------------------------------------------------------

def _motion_magnitudes(pairs: list[MotionPair]) -> tuple[float, float]:
    trans, rot = [], []
    for p in pairs:
        for q in (p.q_a, p.q_b):
            _, angle, t = q.to_rot_trans()
            rot.append(angle)
            trans.append(np.linalg.norm(t))
    return float(np.mean(trans)), float(np.mean(rot))


def noise_sigmas(pairs: list[MotionPair], noise_level) -> tuple[float, float]:
    """Resolve a noise spec into absolute (sigma_trans, sigma_rot).

    A scalar is a fraction of the dataset's mean per-step translation and
    rotation magnitudes; a tuple is taken as absolute sigmas.
    """
    if isinstance(noise_level, (int, float)):
        if noise_level == 0:
            return 0.0, 0.0
        mean_t, mean_r = _motion_magnitudes(pairs)
        return noise_level * mean_t, noise_level * mean_r
    st, sr = noise_level
    return float(st), float(sr)


def _perturbation(rng: np.random.Generator, sigma_t: float, sigma_r: float) -> DualQuat:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.normal(0.0, sigma_r) if sigma_r > 0 else 0.0
    t = rng.normal(0.0, sigma_t, size=3) if sigma_t > 0 else np.zeros(3)
    return DualQuat.from_rot_trans(axis, angle, t)


def add_noise(pairs: list[MotionPair], noise_level, seed: int) -> list[MotionPair]:
    """Left-compose each motion with a random small displacement.

    Rotation noise uses a uniformly random axis and a zero-mean normal
    angle; translation noise is isotropic normal.  A zero level returns the
    input pairs unchanged.
    """
    sigma_t, sigma_r = noise_sigmas(pairs, noise_level)
    if sigma_t == 0.0 and sigma_r == 0.0:
        return list(pairs)
    rng = np.random.default_rng(seed)
    noisy = []
    for p in pairs:
        qa = (_perturbation(rng, sigma_t, sigma_r) * p.q_a).canonicalized()
        qb = (_perturbation(rng, sigma_t, sigma_r) * p.q_b).canonicalized()
        noisy.append(replace(p, q_a=qa, q_b=qb))
    return noisy


# -- sampling helpers ----------------------------------------------------------

def random_unit_dq(rng: np.random.Generator, max_translation: float = 1.0) -> DualQuat:
    """Uniformly random rotation with uniform translation in a cube."""
    r = rng.normal(size=4)
    r /= np.linalg.norm(r)
    t = rng.uniform(-max_translation, max_translation, size=3)
    dual = 0.5 * quat_mul(np.concatenate(([0.0], t)), r)
    return DualQuat(r, dual).canonicalized()


def sample_study_calibration(rng: np.random.Generator) -> DualQuat:
    """Random sensor-rig calibration with offset between 2 m and 8 m."""
    r = rng.normal(size=4)
    r /= np.linalg.norm(r)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    t = direction * rng.uniform(2.0, 8.0)
    dual = 0.5 * quat_mul(np.concatenate(([0.0], t)), r)
    return DualQuat(r, dual).canonicalized()


def simulate_pairs(config: SimConfig) -> tuple[list[MotionPair], DualQuat]:
    """Full pipeline: path -> pair motions -> noise. Returns (pairs, truth)."""
    rng = np.random.default_rng(config.seed)
    truth = config.true_calib
    if truth is None:
        truth = sample_study_calibration(rng)
    poses = generate_path(config)
    pairs = sensor_pair_motions(poses, truth)
    pairs = add_noise(pairs, config.noise_level, seed=config.seed + 1)
    return pairs, truth


# -- planar rig scenario --------------------------------------------------------

@dataclass(frozen=True)
class PlanarRig:
    pairs: list[MotionPair]
    plane_a: GroundPlane
    plane_b: GroundPlane
    true_calib: DualQuat
    mount_a: DualQuat
    mount_b: DualQuat


def planar_rig(n_steps: int = 60, seed: int = 0, step_length: float = 1.0,
               body_height: float = 1.3, noise_level=0.0,
               mount_translation: float = 1.5, rate: float = 10.0) -> PlanarRig:
    """Two tilt-mounted sensors on a body moving in a ground plane.

    The body follows a curvy planar path; each sensor is rigidly mounted
    with a random full-3D offset, so its own motions are planar only after
    alignment with its ground plane.  Ground planes are derived exactly
    from the mounts, making the scenario a noise-controlled oracle for the
    planar pipeline.
    """
    rng = np.random.default_rng(seed)
    mount_a = random_unit_dq(rng, max_translation=mount_translation)
    mount_b = random_unit_dq(rng, max_translation=mount_translation)
    true_calib = (mount_a.conjugate() * mount_b).canonicalized()

    body_cfg = SimConfig(path={"kind": "lissajous", "ax": 14.0, "ay": 9.0,
                               "fx": 1.0, "fy": 2.0},
                         surface={"kind": "flat"}, step_length=step_length,
                         n_steps=n_steps, rate=rate)
    body = generate_path(body_cfg)
    sensor_a = PoseSequence(times=body.times,
                            poses=tuple((w * mount_a).canonicalized()
                                        for w in body.poses))
    pairs = sensor_pair_motions(sensor_a, true_calib)
    pairs = add_noise(pairs, noise_level, seed=seed + 1)

    body_plane = GroundPlane(normal=np.array([0.0, 0.0, 1.0]), distance=body_height)
    plane_a = transform_plane(body_plane, mount_a)
    plane_b = transform_plane(body_plane, mount_b)
    return PlanarRig(pairs=pairs, plane_a=plane_a, plane_b=plane_b,
                     true_calib=true_calib, mount_a=mount_a, mount_b=mount_b)
