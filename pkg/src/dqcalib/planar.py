"""Ground-plane handling for planar-motion calibration.

A plane is stored in Hesse normal form with unit normal ``v`` and offset
``d``; its points satisfy v . x + d = 0.  For a ground plane below the
sensor origin with the normal pointing up, ``d`` is the sensor height and
is nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualquat import DualQuat, quat_to_rot
from .errors import DegenerateInput, NotUnit

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class GroundPlane:
    normal: np.ndarray
    distance: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3).copy()
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-6:
            raise NotUnit(f"plane normal has norm {norm}")
        n /= norm
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "distance", float(self.distance))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return points @ self.normal + self.distance


def plane_alignment_dq(plane: GroundPlane) -> DualQuat:
    """Displacement mapping the sensor frame so the plane becomes z = 0.

    Rotates the plane normal onto +z (axis = normal x e_z, normalized) and
    translates by distance * e_z.  Degenerate axes: identity rotation when
    the normal already points along +z, a half-turn about x when it points
    along -z.
    """
    v = plane.normal
    axis = np.cross(v, _EZ)
    s = np.linalg.norm(axis)
    c = float(v @ _EZ)
    if s < 1e-9:
        if c > 0:
            axis, angle = np.array([1.0, 0.0, 0.0]), 0.0
        else:
            axis, angle = np.array([1.0, 0.0, 0.0]), np.pi
    else:
        axis = axis / s
        angle = float(np.arccos(np.clip(c, -1.0, 1.0)))
    return DualQuat.from_rot_trans(axis, angle, plane.distance * _EZ)


def project_motion(q: DualQuat, q_g: DualQuat) -> DualQuat:
    """Express a motion in the plane-aligned frame (conjugation by q_g)."""
    for x in (q, q_g):
        x._require_unit()
    return (q_g * q * q_g.conjugate()).canonicalized()


def lift_calibration(q_tp: DualQuat, q_ga: DualQuat, q_gb: DualQuat) -> DualQuat:
    """Recover the full 3D calibration from its planar part and both alignments."""
    for x in (q_tp, q_ga, q_gb):
        x._require_unit()
    return (q_ga.conjugate() * q_tp * q_gb).canonicalized()


def transform_plane(plane: GroundPlane, frame: DualQuat) -> GroundPlane:
    """Re-express a plane in a new frame.

    ``frame`` maps new-frame coordinates to the frame the plane is given in
    (x_old = frame(x_new)).
    """
    frame._require_unit()
    R = quat_to_rot(frame.real)
    t = frame.translation()
    normal = R.T @ plane.normal
    distance = plane.distance + float(plane.normal @ t)
    return GroundPlane(normal=normal, distance=distance)


@dataclass(frozen=True)
class RansacOptions:
    seed: int
    iterations: int = 200
    inlier_threshold: float = 0.05


def fit_ground_plane(points: np.ndarray, opts: RansacOptions) -> GroundPlane:
    """RANSAC plane fit with least-squares refinement over the inliers.

    The returned plane is oriented so its offset is nonnegative.  Raises
    :class:`DegenerateInput` when fewer than three points are given or all
    points are collinear.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n_pts = points.shape[0]
    if n_pts < 3 or points.shape[1] != 3:
        raise DegenerateInput("plane fitting needs at least 3 xyz points")

    centered = points - points.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
        raise DegenerateInput("all points are collinear")

    rng = np.random.default_rng(opts.seed)
    best_mask = None
    best_count = -1
    if n_pts == 3:
        candidates = [np.arange(3)]
    else:
        candidates = [rng.choice(n_pts, size=3, replace=False)
                      for _ in range(opts.iterations)]
    for idx in candidates:
        p0, p1, p2 = points[idx]
        cross = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(cross)
        if norm < 1e-12:
            continue
        normal = cross / norm
        offset = -float(normal @ p0)
        dist = np.abs(points @ normal + offset)
        mask = dist <= opts.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None:
        raise DegenerateInput("no non-collinear minimal sample found")

    inliers = points[best_mask]
    centroid = inliers.mean(axis=0)
    _, _, vt = np.linalg.svd(inliers - centroid, full_matrices=False)
    normal = vt[-1]
    distance = -float(normal @ centroid)
    if distance < 0:
        normal, distance = -normal, -distance
    return GroundPlane(normal=normal, distance=distance)
