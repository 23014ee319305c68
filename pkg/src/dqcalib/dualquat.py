"""Dual quaternion algebra for rigid 6-DOF displacements.

Quaternions are stored as length-4 arrays in scalar-first order (w, x, y, z).
A dual quaternion is a pair (real, dual) of quaternions; it represents a
rigid displacement when the real part is unit and the dual part is
orthogonal to it.  The 8-vector form concatenates real then dual part.

Composition convention: ``dq_mul(p, q)`` applies ``q`` first, then ``p``
(like homogeneous-matrix products), so "apply a then b" is ``b * a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitAxis, NotUnit

TOL_UNIT = 1e-9
NORMALIZE_LIMIT = 1e-6


def quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of two (w, x, y, z) quaternions."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_left_mat(q: np.ndarray) -> np.ndarray:
    """4x4 matrix M with M @ vec(x) = vec(q * x)."""
    w, x, y, z = q
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def quat_right_mat(q: np.ndarray) -> np.ndarray:
    """4x4 matrix M with M @ vec(x) = vec(x * q)."""
    w, x, y, z = q
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's method, w >= 0)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    choices = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    case = int(np.argmax(choices))
    if case == 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([
            0.25 * s,
            (R[2, 1] - R[1, 2]) / s,
            (R[0, 2] - R[2, 0]) / s,
            (R[1, 0] - R[0, 1]) / s,
        ])
    elif case == 1:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([
            (R[2, 1] - R[1, 2]) / s,
            0.25 * s,
            (R[0, 1] + R[1, 0]) / s,
            (R[0, 2] + R[2, 0]) / s,
        ])
    elif case == 2:
        s = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
        q = np.array([
            (R[0, 2] - R[2, 0]) / s,
            (R[0, 1] + R[1, 0]) / s,
            0.25 * s,
            (R[1, 2] + R[2, 1]) / s,
        ])
    else:
        s = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
        q = np.array([
            (R[1, 0] - R[0, 1]) / s,
            (R[0, 2] + R[2, 0]) / s,
            (R[1, 2] + R[2, 1]) / s,
            0.25 * s,
        ])
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def _frozen_array(values, n) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(n)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DualQuat:
    """A dual quaternion; unit instances represent rigid displacements.

    Instances are immutable values and safe to share between threads.
    The constructor accepts arbitrary (non-unit) dual quaternions; use
    :meth:`normalized` to enforce the unit constraints or :meth:`is_unit`
    to test them.
    """

    real: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "real", _frozen_array(self.real, 4))
        object.__setattr__(self, "dual", _frozen_array(self.dual, 4))

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls) -> "DualQuat":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4))

    @classmethod
    def from_vec(cls, v: np.ndarray) -> "DualQuat":
        v = np.asarray(v, dtype=float).reshape(8)
        return cls(v[:4], v[4:])

    @classmethod
    def from_rot_trans(cls, axis, angle: float, translation) -> "DualQuat":
        """Build a unit displacement from axis/angle rotation plus translation.

        The axis must be normalized (within 1e-9) unless the angle is zero,
        in which case it is ignored.  The result is sign-canonical.
        """
        axis = np.asarray(axis, dtype=float).reshape(3)
        translation = np.asarray(translation, dtype=float).reshape(3)
        if angle != 0.0:
            n = np.linalg.norm(axis)
            if abs(n - 1.0) > 1e-9:
                raise NonUnitAxis(f"axis norm {n} deviates from 1")
        half = 0.5 * angle
        real = np.concatenate(([np.cos(half)], np.sin(half) * axis))
        t_quat = np.concatenate(([0.0], translation))
        dual = 0.5 * quat_mul(t_quat, real)
        return cls(real, dual).canonicalized()

    @classmethod
    def from_translation(cls, translation) -> "DualQuat":
        return cls.from_rot_trans(np.array([1.0, 0.0, 0.0]), 0.0, translation)

    @classmethod
    def from_homogeneous(cls, T: np.ndarray) -> "DualQuat":
        """Unit displacement from a 4x4 homogeneous matrix (R assumed in SO(3))."""
        T = np.asarray(T, dtype=float)
        real = rot_to_quat(T[:3, :3])
        t_quat = np.concatenate(([0.0], T[:3, 3]))
        dual = 0.5 * quat_mul(t_quat, real)
        return cls(real, dual).canonicalized()

    # -- algebra -----------------------------------------------------------

    def __mul__(self, other: "DualQuat") -> "DualQuat":
        real = quat_mul(self.real, other.real)
        dual = quat_mul(self.real, other.dual) + quat_mul(self.dual, other.real)
        return DualQuat(real, dual)

    def __neg__(self) -> "DualQuat":
        return DualQuat(-self.real, -self.dual)

    def conjugate(self) -> "DualQuat":
        """Quaternion conjugate of both parts; inverse displacement for unit DQs."""
        return DualQuat(quat_conj(self.real), quat_conj(self.dual))

    def vec(self) -> np.ndarray:
        return np.concatenate([self.real, self.dual])

    def canonicalized(self) -> "DualQuat":
        """Fix the +/- sign ambiguity.

        The scalar of the real part is made positive; if it is zero (within
        1e-12) the first nonzero component of the 8-vector decides the sign.
        """
        v = self.vec()
        if abs(v[0]) > 1e-12:
            return self if v[0] > 0 else -self
        for c in v:
            if abs(c) > 1e-12:
                return self if c > 0 else -self
        return self

    def is_unit(self, tol: float = TOL_UNIT) -> bool:
        norm_defect = abs(self.real @ self.real - 1.0)
        orth_defect = abs(2.0 * (self.real @ self.dual))
        return norm_defect <= tol and orth_defect <= tol

    def normalized(self, limit: float = NORMALIZE_LIMIT) -> "DualQuat":
        """Return the nearest unit dual quaternion.

        Renormalizes the real part and projects the dual part onto the
        tangent.  Raises :class:`NotUnit` when the defect exceeds ``limit``;
        small constraint drift is repaired silently.
        """
        nr = np.linalg.norm(self.real)
        if abs(nr * nr - 1.0) > limit:
            raise NotUnit(f"real-part norm {nr} too far from 1")
        dual_scale = 1.0 + np.linalg.norm(self.dual)
        raw_orth = 2.0 * (self.real @ self.dual)
        if abs(nr * nr - 1.0) <= 1e-15 and abs(raw_orth) <= 1e-15 * dual_scale:
            return self  # already unit to machine precision; keep bits stable
        real = self.real / nr
        orth = 2.0 * (real @ self.dual)
        if abs(orth) > limit * dual_scale:
            raise NotUnit(f"real/dual orthogonality defect {orth}")
        dual = self.dual - (real @ self.dual) * real
        return DualQuat(real, dual)

    def _require_unit(self):
        if not self.is_unit():
            raise NotUnit("operation requires a unit dual quaternion")

    # -- rigid displacement views -----------------------------------------

    def translation(self) -> np.ndarray:
        """Translation vector, the vector part of 2 * dual * conj(real)."""
        return 2.0 * quat_mul(self.dual, quat_conj(self.real))[1:]

    def rotation_matrix(self) -> np.ndarray:
        self._require_unit()
        return quat_to_rot(self.real)

    def to_rot_trans(self):
        """Decompose into (axis, angle, translation) with angle in [0, pi].

        For a zero rotation the axis defaults to (1, 0, 0) so round trips
        are deterministic.
        """
        self._require_unit()
        q = self.canonicalized()
        sin_half = np.linalg.norm(q.real[1:])
        angle = 2.0 * np.arctan2(sin_half, q.real[0])
        if sin_half > 1e-9:
            axis = q.real[1:] / sin_half
        else:
            axis = np.array([1.0, 0.0, 0.0])
        return axis, angle, q.translation()

    def to_homogeneous(self) -> np.ndarray:
        self._require_unit()
        T = np.eye(4)
        T[:3, :3] = quat_to_rot(self.real)
        T[:3, 3] = self.translation()
        return T

    def transform_point(self, v) -> np.ndarray:
        """Apply the displacement to a point: R @ v + t."""
        self._require_unit()
        v = np.asarray(v, dtype=float).reshape(3)
        qv = np.concatenate(([0.0], v))
        rotated = quat_mul(quat_mul(self.real, qv), quat_conj(self.real))[1:]
        return rotated + self.translation()

    # -- comparisons -------------------------------------------------------

    def is_close(self, other: "DualQuat", atol: float = 1e-9,
                 up_to_sign: bool = True) -> bool:
        d_plus = np.max(np.abs(self.vec() - other.vec()))
        if not up_to_sign:
            return d_plus <= atol
        d_minus = np.max(np.abs(self.vec() + other.vec()))
        return min(d_plus, d_minus) <= atol

    def __repr__(self):
        r = np.array2string(self.real, precision=6, suppress_small=True)
        d = np.array2string(self.dual, precision=6, suppress_small=True)
        return f"DualQuat(real={r}, dual={d})"


def dq_mul(p: DualQuat, q: DualQuat) -> DualQuat:
    """Dual quaternion product; ``q`` acts first, ``p`` second."""
    return p * q


def conjugate(q: DualQuat) -> DualQuat:
    return q.conjugate()


def canonicalize(q: DualQuat) -> DualQuat:
    return q.canonicalized()


def transform_point(q: DualQuat, v) -> np.ndarray:
    return q.transform_point(v)


def from_rot_trans(axis, angle, translation) -> DualQuat:
    return DualQuat.from_rot_trans(axis, angle, translation)


def to_rot_trans(q: DualQuat):
    return q.to_rot_trans()


def left_mat(p: DualQuat) -> np.ndarray:
    """8x8 matrix L with L @ vec(q) = vec(p * q); block lower triangular."""
    M = np.zeros((8, 8))
    Mr = quat_left_mat(p.real)
    M[:4, :4] = Mr
    M[4:, 4:] = Mr
    M[4:, :4] = quat_left_mat(p.dual)
    return M


def right_mat(q: DualQuat) -> np.ndarray:
    """8x8 matrix R with R @ vec(p) = vec(p * q); block lower triangular."""
    M = np.zeros((8, 8))
    Mr = quat_right_mat(q.real)
    M[:4, :4] = Mr
    M[4:, 4:] = Mr
    M[4:, :4] = quat_right_mat(q.dual)
    return M
