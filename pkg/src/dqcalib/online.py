"""Online calibration combining the fast local and the global solver.

Each incoming motion pair is (optionally plane-aligned and) accumulated;
the fast solver runs warm-started from the previous solution and its
result is certified.  A failed certificate stamps the error time; while
the latest error is within the no-fail window the global solver's result
replaces the fast one.  With exact ground planes configured, solutions are
estimated in the plane-aligned frame and lifted back to 3D on output.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import ConstraintMode, assemble_Z
from .cost import CostAccumulator, MotionPair
from .errors import NonMonotonicTime, NonUniqueSolution
from .global_solver import (CalibSolution, DualSolveOptions,
                            _nullspace_solution, solve_global)
from .local_solver import LocalSolveOptions, solve_local
from .planar import GroundPlane, lift_calibration, plane_alignment_dq
from .verify import VerifyOptions, certify

PLANE_DERIVED_DOFS = ("z", "roll", "pitch")


@dataclass(frozen=True)
class OnlineConfig:
    mode: ConstraintMode = ConstraintMode.FULL_3D
    t_no_fail: float = 5.0
    plane_a: GroundPlane | None = None
    plane_b: GroundPlane | None = None
    local_opts: LocalSolveOptions = field(default_factory=LocalSolveOptions)
    dual_opts: DualSolveOptions = field(default_factory=DualSolveOptions)
    verify_opts: VerifyOptions = field(default_factory=VerifyOptions)

    def __post_init__(self):
        if self.t_no_fail < 0:
            raise ValueError("t_no_fail must be nonnegative")
        if (self.plane_a is None) != (self.plane_b is None):
            raise ValueError("ground planes must be given for both sensors")
        if self.plane_a is not None and self.mode is not ConstraintMode.PLANAR:
            raise ValueError("ground planes require planar mode")


class OnlineCalibrator:
    """Sequential estimator; single owner, mutated only through update()."""

    def __init__(self, config: OnlineConfig | None = None):
        self.config = config or OnlineConfig()
        if self.config.plane_a is not None:
            self._align_a = plane_alignment_dq(self.config.plane_a)
            self._align_b = plane_alignment_dq(self.config.plane_b)
        else:
            self._align_a = None
            self._align_b = None
        self.acc = CostAccumulator(self.config.mode,
                                   align_a=self._align_a,
                                   align_b=self._align_b)
        self.t_last_local_error: float | None = None
        self._last_time = -np.inf
        self._warm: np.ndarray | None = None

    def _probe_degenerate(self, Q, lam):
        Z = assemble_Z(Q, lam, self.config.mode)
        _, null_dim, unique, _ = _nullspace_solution(
            Z, self.config.mode, self.config.dual_opts.null_tol,
            scale=float(np.trace(Q)))
        return null_dim, not unique

    def update(self, pair: MotionPair) -> CalibSolution:
        """Process one pair and return the current calibration estimate."""
        cfg = self.config
        if pair.timestamp <= self._last_time:
            raise NonMonotonicTime(
                f"timestamp {pair.timestamp} not after {self._last_time}")
        self._last_time = pair.timestamp
        if self.t_last_local_error is None:
            self.t_last_local_error = pair.timestamp

        t0 = time.perf_counter()
        self.acc.add(pair)
        Q = self.acc.normalized_q

        local_opts = replace(cfg.local_opts, init=self._warm)
        local = solve_local(Q, cfg.mode, local_opts)
        cert = certify(Q, local.q_hat, cfg.mode, cfg.verify_opts)
        if not cert.is_global:
            self.t_last_local_error = pair.timestamp

        use_global = (pair.timestamp - self.t_last_local_error) <= cfg.t_no_fail
        degenerate = False
        diagnostic = None
        if use_global:
            try:
                sol = solve_global(self.acc, cfg.dual_opts,
                                   cfg.verify_opts.gap_threshold)
            except NonUniqueSolution as err:
                null_dim, _ = self._probe_degenerate(Q, cert.lambda_fit)
                sol = CalibSolution(
                    q_hat=local.q_hat, lam=cert.lambda_fit,
                    primal_cost=local.cost, dual_value=float(cert.lambda_fit[0]),
                    gap=cert.gap, is_global=False, provenance="global",
                    null_dim=null_dim, degenerate=True, diagnostic=str(err))
                degenerate = True
                diagnostic = str(err)
        else:
            null_dim, degenerate = self._probe_degenerate(Q, cert.lambda_fit)
            diagnostic = "feasible set not unique" if degenerate else None
            sol = CalibSolution(
                q_hat=local.q_hat, lam=cert.lambda_fit,
                primal_cost=local.cost, dual_value=float(cert.lambda_fit[0]),
                gap=cert.gap, is_global=cert.is_global, provenance="local",
                null_dim=null_dim, degenerate=degenerate, diagnostic=diagnostic)

        self._warm = sol.q_hat.vec()

        if self._align_a is not None:
            lifted = lift_calibration(sol.q_hat, self._align_a, self._align_b)
            sol = replace(sol, q_hat=lifted, q_hat_planar=sol.q_hat,
                          plane_derived=PLANE_DERIVED_DOFS)
        if degenerate and not sol.degenerate:
            sol = replace(sol, degenerate=True, diagnostic=diagnostic)
        sol = replace(sol, solve_time=time.perf_counter() - t0)
        return sol


def replay(pairs, config: OnlineConfig | None = None) -> list[CalibSolution]:
    """Feed a time-ordered pair stream through a fresh calibrator."""
    calib = OnlineCalibrator(config)
    return [calib.update(p) for p in pairs]
