"""Certifiably global solver via the Lagrangian dual of the calibration QCQP.

The dual problem maximizes lam_1 subject to Z(lam) >= 0.  Because
lam -> lambda_min(Z(lam)) is concave, the feasible lam_1 values form an
interval: the solver bisects on lam_1 and, at each candidate, maximizes the
minimum eigenvalue over the remaining multipliers (golden-section in 3D
mode, coordinate-ascent sweeps with a supergradient fallback in planar
mode).  The primal is recovered from the (near-)null space of Z at the
optimum.

Consistent (noise-free) data always carries structural extra null
directions with zero real part — most prominently vec(eps * q_r), which
closes every motion loop but is not a unit dual quaternion.  Recovery
therefore selects the unique constraint-satisfying combination inside the
null space instead of assuming it is one-dimensional; a genuine continuum
of feasible solutions (unobservable data) raises NonUniqueSolution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintMode, assemble_Z, constraint_matrices, eval_g
from .cost import CostAccumulator
from .dualquat import DualQuat
from .errors import EmptyData, NoNullSpace, NonUniqueSolution
from .local_solver import LocalSolveOptions, project_feasible, solve_local

GAP_THRESHOLD = 1e-6

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DualSolveOptions:
    tol_psd: float = 1e-9
    tol_obj: float = 1e-10
    max_outer: int = 200
    null_tol: float = 1e-7

    def __post_init__(self):
        if min(self.tol_psd, self.tol_obj, self.max_outer, self.null_tol) <= 0:
            raise ValueError("all dual-solver options must be positive")


@dataclass(frozen=True)
class DualSolution:
    lam: np.ndarray
    dual_value: float
    min_eig: float
    q_hat: np.ndarray
    primal_cost: float
    null_dim: int


@dataclass(frozen=True)
class CalibSolution:
    """Solver output: estimate, duality diagnostics, and provenance."""

    q_hat: DualQuat
    lam: np.ndarray
    primal_cost: float
    dual_value: float | None
    gap: float
    is_global: bool
    provenance: str  # "local" or "global"
    solve_time: float = 0.0
    q_hat_planar: DualQuat | None = None
    null_dim: int | None = None
    degenerate: bool = False
    diagnostic: str | None = None
    plane_derived: tuple[str, ...] | None = None


def _min_eig(Q: np.ndarray, lam, mode: ConstraintMode) -> float:
    return float(np.linalg.eigvalsh(assemble_Z(Q, lam, mode))[0])


def _golden_max(f, center: float, tol: float, exit_level: float | None):
    """Maximize a concave 1-D function; bracket grown geometrically from center.

    Returns (x_best, f_best).  If ``exit_level`` is given, returns early as
    soon as any evaluation reaches it (enough to decide feasibility).
    """
    fc = f(center)
    if exit_level is not None and fc >= exit_level:
        return center, fc
    plateau = lambda new, old: new - old < 1e-12 * (1.0 + abs(old))
    step = 0.5
    lo, flo = center, fc
    # expand left
    while True:
        x = lo - step
        fx = f(x)
        if exit_level is not None and fx >= exit_level:
            return x, fx
        if fx < flo:
            left = x
            break
        if plateau(fx, flo):
            # asymptotic direction (e.g. a PSD multiplier matrix): no gain
            # from chasing it further out
            lo, flo = x, fx
            left = x - step
            break
        lo, flo = x, fx
        step *= 2.0
        if step > 1e12:
            return lo, flo
    step = 0.5
    hi, fhi = center, fc
    while True:
        x = hi + step
        fx = f(x)
        if exit_level is not None and fx >= exit_level:
            return x, fx
        if fx < fhi:
            right = x
            break
        if plateau(fx, fhi):
            hi, fhi = x, fx
            right = x + step
            break
        hi, fhi = x, fx
        step *= 2.0
        if step > 1e12:
            return hi, fhi
    # golden-section shrink on [left, right]
    a, b = left, right
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    if flo > best_f:
        best_x, best_f = lo, flo
    if fhi > best_f:
        best_x, best_f = hi, fhi
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if exit_level is not None and best_f >= exit_level:
            return best_x, best_f
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        if f1 > best_f:
            best_x, best_f = x1, f1
        if f2 > best_f:
            best_x, best_f = x2, f2
    return best_x, best_f


def _inner_max(Q: np.ndarray, lam1: float, mode: ConstraintMode,
               warm: np.ndarray, exit_level: float | None,
               tol: float = 1e-8):
    """max over the remaining multipliers of lambda_min(Z(lam1, rest))."""
    if mode is ConstraintMode.FULL_3D:
        def f(l2):
            return _min_eig(Q, np.array([lam1, l2]), mode)
        x, val = _golden_max(f, float(warm[0]), tol, exit_level)
        return np.array([x]), val

    rest = np.array(warm, dtype=float).copy()

    def f_at(rest_vec):
        return _min_eig(Q, np.concatenate([[lam1], rest_vec]), mode)

    best = f_at(rest)
    if exit_level is not None and best >= exit_level:
        return rest, best
    for _ in range(40):  # coordinate-ascent sweeps
        improved = best
        for j in range(3):
            def fj(x, j=j):
                trial = rest.copy()
                trial[j] = x
                return f_at(trial)
            xj, vj = _golden_max(fj, float(rest[j]), tol, exit_level)
            if vj > best:
                rest = rest.copy()
                rest[j] = xj
                best = vj
                if exit_level is not None and best >= exit_level:
                    return rest, best
        if best - improved < 1e-13 * (1.0 + abs(best)):
            break
    # supergradient polish guards against coordinate-ascent stalls at
    # eigenvalue crossings
    lam_full = np.concatenate([[lam1], rest])
    vals, vecs = np.linalg.eigh(assemble_Z(Q, lam_full, mode))
    v = vecs[:, 0]
    Gs = constraint_matrices(mode)[1:]
    grad = np.array([v @ G @ v for G in Gs])
    if np.linalg.norm(grad) > 1e-9:
        cur = rest.copy()
        for k in range(1, 60):
            cur = cur + (0.25 / k) * grad
            val = f_at(cur)
            if val > best:
                rest, best = cur.copy(), val
                if exit_level is not None and best >= exit_level:
                    return rest, best
            lam_full = np.concatenate([[lam1], cur])
            vals, vecs = np.linalg.eigh(assemble_Z(Q, lam_full, mode))
            v = vecs[:, 0]
            grad = np.array([v @ G @ v for G in Gs])
    return rest, best


def solve_dual(Q: np.ndarray, mode: ConstraintMode,
               opts: DualSolveOptions | None = None) -> np.ndarray:
    """Maximize lam_1 subject to Z(lam) >= 0; returns the full multiplier vector.

    The search interval is [0, c] where c is the cost of any feasible point
    (weak duality).  The feasibility slack is kept near machine precision so
    the returned lam_1 is a valid lower bound on the primal optimum.
    """
    opts = opts or DualSolveOptions()
    Q = np.asarray(Q, dtype=float).reshape(8, 8)
    n_rest = 1 if mode is ConstraintMode.FULL_3D else 3
    rest = np.zeros(n_rest)

    q_feas = project_feasible(np.array([1.0, 0, 0, 0, 0, 0, 0, 0]), mode)
    ub = float(q_feas @ Q @ q_feas)
    slack = -1e-13 * (1.0 + np.linalg.norm(Q, ord="fro"))

    if ub <= opts.tol_obj:
        rest, _ = _inner_max(Q, 0.0, mode, rest, exit_level=None)
        return np.concatenate([[0.0], rest])

    # cheap probe: optimum at (or within tol of) zero is the common
    # noise-free case and needs no bisection
    rest_probe, val = _inner_max(Q, opts.tol_obj, mode, rest, exit_level=0.0)
    if val < slack:
        rest, _ = _inner_max(Q, 0.0, mode, rest, exit_level=None)
        return np.concatenate([[0.0], rest])

    lb = opts.tol_obj
    rest = rest_probe
    outer = 0
    while ub - lb > opts.tol_obj and outer < opts.max_outer:
        outer += 1
        mid = 0.5 * (lb + ub)
        rest_mid, val = _inner_max(Q, mid, mode, rest, exit_level=0.0)
        if val >= slack:
            lb, rest = mid, rest_mid
        else:
            ub = mid
    rest, _ = _inner_max(Q, lb, mode, rest, exit_level=None)
    return np.concatenate([[lb], rest])


def _nullspace_solution(Z: np.ndarray, mode: ConstraintMode, null_tol: float,
                        scale: float = 1.0):
    """Pick the unique constraint-feasible 8-vector in the near-null space.

    Returns (q8 or None, null_dim, unique, diagnostic).  ``q8`` is scaled
    to unit real part but not yet sign-canonical.  ``scale`` is the data
    magnitude the relative threshold refers to; it must not depend on the
    multipliers (a large feasible multiplier would otherwise sweep genuine
    noise-lifted directions into the null space).
    """
    vals, vecs = np.linalg.eigh(Z)
    thresh = null_tol * max(1.0, scale)
    mask = vals < thresh
    null_dim = int(mask.sum())
    if null_dim == 0:
        return None, 0, True, "no null space within tolerance"
    V = vecs[:, mask]

    # separate directions that carry real-part norm from pure-dual ones
    A = V[:4].T @ V[:4]
    eig_a, U = np.linalg.eigh(A)
    carriers = eig_a > 1e-3
    n_carriers = int(carriers.sum())
    if n_carriers == 0:
        return None, null_dim, False, "null space has no unit-normalizable direction"
    if n_carriers > 1:
        return None, null_dim, False, "multiple independent feasible directions"

    v0 = V @ U[:, -1]
    v0 = v0 / np.linalg.norm(v0[:4])
    D = V @ U[:, :-1]  # pure-dual directions (real part ~ 0)

    cons = constraint_matrices(mode)[1:]  # g1 handled by the scaling above
    if D.shape[1] == 0:
        return v0, null_dim, True, None
    # remaining constraints are linear in the pure-dual coefficients
    M = np.array([[2.0 * (v0 @ G @ D[:, j]) for j in range(D.shape[1])]
                  for G in cons])
    b = -np.array([v0 @ G @ v0 for G in cons])
    u, s, vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0] if len(s) else 0.0)))
    if rank < D.shape[1]:
        return None, null_dim, False, "feasible set in null space is a continuum"
    mu = np.linalg.lstsq(M, b, rcond=None)[0]
    v = v0 + D @ mu
    v = v / np.linalg.norm(v[:4])
    residual = np.max(np.abs(eval_g(v, mode)))
    if residual > 1e-5:
        return None, null_dim, False, f"constraints unmet in null space ({residual:.2e})"
    return v, null_dim, True, None


def recover_primal(Q: np.ndarray, lam: np.ndarray, mode: ConstraintMode,
                   opts: DualSolveOptions | None = None) -> tuple[np.ndarray, int]:
    """Primal solution from the near-null space of Z(lam).

    Raises :class:`NoNullSpace` when Z has no sufficiently small eigenvalue
    (dual not converged) and :class:`NonUniqueSolution` when the data does
    not pin down a single calibration (e.g. all rotation axes parallel
    without planar constraints).
    """
    opts = opts or DualSolveOptions()
    Q = np.asarray(Q, dtype=float).reshape(8, 8)
    Z = assemble_Z(Q, lam, mode)
    scale = float(np.trace(Q))
    q8, null_dim, unique, diag = _nullspace_solution(Z, mode, opts.null_tol, scale)
    if null_dim == 0:
        raise NoNullSpace(diag)
    if not unique or q8 is None:
        vals, vecs = np.linalg.eigh(Z)
        basis = vecs[:, vals < opts.null_tol * max(1.0, scale)]
        raise NonUniqueSolution(diag, basis=basis, null_dim=null_dim)
    q8 = project_feasible(q8, mode)
    q8 = DualQuat.from_vec(q8).canonicalized().vec()
    return q8, null_dim


def solve_global(acc: CostAccumulator, opts: DualSolveOptions | None = None,
                 gap_threshold: float = GAP_THRESHOLD) -> CalibSolution:
    """Dual solve plus primal recovery over an accumulator snapshot."""
    if acc.n == 0:
        raise EmptyData("accumulator holds no motion pairs")
    opts = opts or DualSolveOptions()
    Q = acc.normalized_q
    mode = acc.mode
    t0 = time.perf_counter()
    lam = solve_dual(Q, mode, opts)
    q8, null_dim = recover_primal(Q, lam, mode, opts)
    primal = float(q8 @ Q @ q8)
    # Newton polish: the recovered vector can carry a small component of a
    # nearly-null direction (finite dual tolerance); a warm-started local
    # solve lands on the exact KKT point of the same basin
    polish = solve_local(Q, mode, LocalSolveOptions(init=q8))
    if polish.converged and polish.cost <= primal + 1e-15:
        q8 = polish.q_hat.vec()
        primal = polish.cost
    elapsed = time.perf_counter() - t0
    dual_value = float(lam[0])
    gap = primal - dual_value
    return CalibSolution(
        q_hat=DualQuat.from_vec(q8),
        lam=lam,
        primal_cost=primal,
        dual_value=dual_value,
        gap=gap,
        is_global=bool(gap < gap_threshold),
        provenance="global",
        solve_time=elapsed,
        null_dim=null_dim,
    )
