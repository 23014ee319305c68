"""Equality constraints on the 8-vector calibration variable.

Two constraint sets are supported: the full rigid-displacement set
(real-part normalization g1 and real/dual orthogonality g2) and the planar
set which adds g3 (no roll/pitch: q2^2 + q3^2 = 0) and g4 (no out-of-plane
translation: q1*q8 - q4*q5 = 0).

Every constraint is a quadratic form plus constant, g_i(q) = q^T G_i q + c_i,
so the Lagrangian is q^T Z(lam) q + lam_1 with Z(lam) = Q + sum_i lam_i G_i.

The quadratic g3 has vanishing gradient on its own zero set, which breaks
constraint qualification for Newton-type solvers.  The ``local`` variants
therefore replace it by the linear pair q2 = 0, q3 = 0 (identical feasible
set); the dual/SDP path keeps the quadratic form.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class ConstraintMode(Enum):
    FULL_3D = "3d"
    PLANAR = "planar"


def _g1_matrix() -> np.ndarray:
    G = np.zeros((8, 8))
    G[:4, :4] = -np.eye(4)
    return G


def _g2_matrix() -> np.ndarray:
    G = np.zeros((8, 8))
    G[:4, 4:] = np.eye(4)
    G[4:, :4] = np.eye(4)
    return G


def _g3_matrix() -> np.ndarray:
    G = np.zeros((8, 8))
    G[1, 1] = 1.0
    G[2, 2] = 1.0
    return G


def _g4_matrix() -> np.ndarray:
    G = np.zeros((8, 8))
    G[0, 7] = G[7, 0] = 0.5
    G[3, 4] = G[4, 3] = -0.5
    return G


_G1 = _g1_matrix()
_G2 = _g2_matrix()
_G3 = _g3_matrix()
_G4 = _g4_matrix()
for _m in (_G1, _G2, _G3, _G4):
    _m.setflags(write=False)

_CONSTANTS_3D = np.array([1.0, 0.0])
_CONSTANTS_PLANAR = np.array([1.0, 0.0, 0.0, 0.0])


def constraint_count(mode: ConstraintMode) -> int:
    return 2 if mode is ConstraintMode.FULL_3D else 4


def constraint_matrices(mode: ConstraintMode) -> list[np.ndarray]:
    """Quadratic-form matrices G_i, ordered (g1, g2[, g3, g4])."""
    if mode is ConstraintMode.FULL_3D:
        return [_G1, _G2]
    return [_G1, _G2, _G3, _G4]


def eval_g(q: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """Constraint residuals; all zero iff q is a valid displacement for the mode."""
    q = np.asarray(q, dtype=float).reshape(8)
    g1 = 1.0 - q[:4] @ q[:4]
    g2 = 2.0 * (q[:4] @ q[4:])
    if mode is ConstraintMode.FULL_3D:
        return np.array([g1, g2])
    g3 = q[1] * q[1] + q[2] * q[2]
    g4 = q[0] * q[7] - q[3] * q[4]
    return np.array([g1, g2, g3, g4])


def grad_g(q: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """Jacobian of eval_g, one row per constraint (rows are 2 * G_i @ q)."""
    q = np.asarray(q, dtype=float).reshape(8)
    return np.stack([2.0 * (G @ q) for G in constraint_matrices(mode)])


def multiplier_matrices(lam: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """P(lam) = sum_i lam_i G_i, so q^T P q + lam_1 = lam^T g(q)."""
    lam = np.asarray(lam, dtype=float).reshape(constraint_count(mode))
    P = np.zeros((8, 8))
    for li, G in zip(lam, constraint_matrices(mode)):
        P += li * G
    return P


def assemble_Z(Q: np.ndarray, lam: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """Z(lam) = Q + P(lam); the Hessian of the Lagrangian (up to a factor 2)."""
    lam = np.asarray(lam, dtype=float).reshape(constraint_count(mode))
    Z = np.array(Q, dtype=float, copy=True)
    idx = np.arange(4)
    Z[idx, idx] -= lam[0]
    Z[idx, idx + 4] += lam[1]
    Z[idx + 4, idx] += lam[1]
    if mode is ConstraintMode.PLANAR:
        Z[1, 1] += lam[2]
        Z[2, 2] += lam[2]
        Z[0, 7] += 0.5 * lam[3]
        Z[7, 0] += 0.5 * lam[3]
        Z[3, 4] -= 0.5 * lam[3]
        Z[4, 3] -= 0.5 * lam[3]
    return Z


# -- regular constraint set for Newton-type local solvers -------------------

def local_constraint_count(mode: ConstraintMode) -> int:
    return 2 if mode is ConstraintMode.FULL_3D else 5


def eval_g_local(q: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    """Residuals of the solver constraint set: (g1, g2[, q2, q3, g4])."""
    q = np.asarray(q, dtype=float).reshape(8)
    g1 = 1.0 - q[:4] @ q[:4]
    g2 = 2.0 * (q[:4] @ q[4:])
    if mode is ConstraintMode.FULL_3D:
        return np.array([g1, g2])
    g4 = q[0] * q[7] - q[3] * q[4]
    return np.array([g1, g2, q[1], q[2], g4])


def grad_g_local(q: np.ndarray, mode: ConstraintMode) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(8)
    rows = [2.0 * (_G1 @ q), 2.0 * (_G2 @ q)]
    if mode is ConstraintMode.PLANAR:
        e2 = np.zeros(8)
        e2[1] = 1.0
        e3 = np.zeros(8)
        e3[2] = 1.0
        rows += [e2, e3, 2.0 * (_G4 @ q)]
    return np.stack(rows)


def hess_g_local(mode: ConstraintMode) -> list[np.ndarray]:
    """Constant constraint Hessians matching eval_g_local's ordering."""
    if mode is ConstraintMode.FULL_3D:
        return [2.0 * _G1, 2.0 * _G2]
    zero = np.zeros((8, 8))
    return [2.0 * _G1, 2.0 * _G2, zero, zero, 2.0 * _G4]


def local_sign_flip_mask(mode: ConstraintMode) -> np.ndarray:
    """Multiplier signs to flip when the iterate is negated.

    Quadratic constraints are even in q, the linear ones are odd.
    """
    if mode is ConstraintMode.FULL_3D:
        return np.ones(2)
    return np.array([1.0, 1.0, -1.0, -1.0, 1.0])
