"""Quadratic cost from the motion loop-closure condition.

For a synchronized pair of incremental sensor motions (q_a, q_b), a
calibration q must satisfy q_a * q = q * q_b.  Writing both products with
the 8x8 multiplication matrices gives a residual (R - L) vec(q) whose
squared norm yields one positive-semidefinite 8x8 cost matrix per pair.
Pair matrices are averaged with weights summing to one, which keeps the
duality-gap threshold independent of the dataset size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import ConstraintMode
from .dualquat import DualQuat, left_mat, right_mat
from .errors import InvalidWeight


@dataclass(frozen=True)
class MotionPair:
    """One synchronized pair of per-sensor incremental motions.

    ``weight_diag`` weights the 8 residual coordinates; ``eta`` is an
    optional per-pair confidence weight (renormalized internally so the
    weights over a dataset sum to one).
    """

    q_a: DualQuat
    q_b: DualQuat
    timestamp: float = 0.0
    weight_diag: np.ndarray = field(default=None)
    eta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q_a", self.q_a.normalized().canonicalized())
        object.__setattr__(self, "q_b", self.q_b.normalized().canonicalized())
        w = np.ones(8) if self.weight_diag is None else np.asarray(
            self.weight_diag, dtype=float).reshape(8).copy()
        if np.any(w < 0):
            raise InvalidWeight("residual weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weight_diag", w)
        if self.eta is not None and self.eta < 0:
            raise InvalidWeight("eta must be nonnegative")


def pair_cost_matrix(pair: MotionPair) -> np.ndarray:
    """Weighted PSD cost matrix of one pair: (R - L)^T diag(w) (R - L)."""
    D = right_mat(pair.q_b) - left_mat(pair.q_a)
    Q = D.T @ (pair.weight_diag[:, None] * D)
    return 0.5 * (Q + Q.T)


def _project_pair(pair: MotionPair, align_a: DualQuat, align_b: DualQuat) -> MotionPair:
    qa = (align_a * pair.q_a * align_a.conjugate()).canonicalized()
    qb = (align_b * pair.q_b * align_b.conjugate()).canonicalized()
    return replace(pair, q_a=qa, q_b=qb)


class CostAccumulator:
    """Running sum of per-pair cost matrices with weight normalization.

    In planar mode with alignment displacements set, incoming motions are
    conjugated into the respective ground-plane frames before their cost
    matrix is formed.  Single writer; snapshots returned by
    :attr:`normalized_q` are fresh arrays safe to hand to solver threads.
    """

    def __init__(self, mode: ConstraintMode = ConstraintMode.FULL_3D,
                 align_a: DualQuat | None = None,
                 align_b: DualQuat | None = None):
        self.mode = mode
        self.align_a = align_a
        self.align_b = align_b
        self.sum_q = np.zeros((8, 8))
        self.n = 0
        self.sum_eta = 0.0

    def add(self, pair: MotionPair) -> "CostAccumulator":
        if self.mode is ConstraintMode.PLANAR and self.align_a is not None:
            pair = _project_pair(pair, self.align_a, self.align_b)
        eta = 1.0 if pair.eta is None else pair.eta
        self.sum_q += eta * pair_cost_matrix(pair)
        self.sum_q = 0.5 * (self.sum_q + self.sum_q.T)
        self.n += 1
        self.sum_eta += eta
        return self

    @property
    def normalized_q(self) -> np.ndarray:
        if self.n == 0 or self.sum_eta == 0.0:
            return np.zeros((8, 8))
        Q = self.sum_q / self.sum_eta
        return 0.5 * (Q + Q.T)

    def copy(self) -> "CostAccumulator":
        other = CostAccumulator(self.mode, self.align_a, self.align_b)
        other.sum_q = self.sum_q.copy()
        other.n = self.n
        other.sum_eta = self.sum_eta
        return other


def accumulate(acc: CostAccumulator, pair: MotionPair) -> CostAccumulator:
    """Functional variant of :meth:`CostAccumulator.add`."""
    return acc.copy().add(pair)


def cost_value(acc: CostAccumulator, q: np.ndarray) -> float:
    """Normalized quadratic cost of an 8-vector candidate."""
    q = np.asarray(q, dtype=float).reshape(8)
    return float(q @ acc.normalized_q @ q)
