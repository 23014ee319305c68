import numpy as np
import pytest

from dqcalib.constraints import ConstraintMode, assemble_Z, eval_g
from dqcalib.cost import CostAccumulator
from dqcalib.errors import EmptyData, NonUniqueSolution
from dqcalib.global_solver import (DualSolveOptions, recover_primal,
                                   solve_dual, solve_global)
from dqcalib.local_solver import LocalSolveOptions, solve_local
from dqcalib.metrics import calib_error
from dqcalib.planar import plane_alignment_dq
from dqcalib.sim import planar_rig, random_unit_dq, sensor_pair_motions

from conftest import accumulate_pairs, make_dataset


def oracle_dual_lambda1(Q, mode=ConstraintMode.FULL_3D, xtol=1e-9):
    """Brute-force reference for the optimal dual value (2-multiplier case).

    Independent route: scipy bounded scalar minimization for the inner
    maximization over lam_2 plus a grid scan and Brent root refinement on
    the outer feasibility boundary in lam_1.
    """
    from scipy.optimize import brentq, minimize_scalar

    bound = 4.0 * (1.0 + np.linalg.norm(Q, 2))

    def phi(l1):
        res = minimize_scalar(
            lambda l2: -np.linalg.eigvalsh(assemble_Z(Q, [l1, l2], mode))[0],
            bounds=(-bound, bound), method="bounded",
            options={"xatol": 1e-12})
        return -res.fun

    ub = float(Q[0, 0])  # identity is feasible: cost = Q[0,0]
    if ub <= xtol:
        return 0.0
    grid = np.linspace(0.0, ub, 40)
    feas = [phi(g) >= 0.0 for g in grid]
    if all(feas):
        return ub
    k = max(i for i, f in enumerate(feas) if f)
    return brentq(phi, grid[k], grid[k + 1], xtol=xtol)


class TestSolveDual:
    def test_zero_cost_matrix(self):
        lam = solve_dual(np.zeros((8, 8)), ConstraintMode.FULL_3D)
        assert np.allclose(lam, [0.0, 0.0], atol=1e-9)

    def test_noise_free_dual_value_is_zero(self):
        pairs, _ = make_dataset(seed=21, n_pairs=10)
        Q = accumulate_pairs(pairs).normalized_q
        lam = solve_dual(Q, ConstraintMode.FULL_3D)
        assert abs(lam[0]) < 1e-9
        assert np.linalg.eigvalsh(assemble_Z(Q, lam, ConstraintMode.FULL_3D))[0] >= -1e-9

    @pytest.mark.parametrize("seed,noise,n", [(31, 0.05, 50), (32, 0.1, 80),
                                              (33, 0.02, 30), (34, 0.08, 120)])
    def test_matches_brute_force_oracle(self, seed, noise, n):
        pairs, _ = make_dataset(seed=seed, n_pairs=n, noise=noise)
        Q = accumulate_pairs(pairs).normalized_q
        lam = solve_dual(Q, ConstraintMode.FULL_3D)
        assert abs(lam[0] - oracle_dual_lambda1(Q)) < 1e-6

    def test_feasibility_of_returned_multipliers(self):
        pairs, _ = make_dataset(seed=35, n_pairs=60, noise=0.1)
        Q = accumulate_pairs(pairs).normalized_q
        opts = DualSolveOptions()
        lam = solve_dual(Q, ConstraintMode.FULL_3D, opts)
        Z = assemble_Z(Q, lam, ConstraintMode.FULL_3D)
        min_eig = np.linalg.eigvalsh(Z)[0]
        assert min_eig >= -opts.tol_psd * (1 + np.linalg.norm(Z))


class TestRecoverPrimal:
    def test_diagonal_gap_case(self):
        Q = np.diag([0.0] + [1.0] * 7)
        q8, null_dim = recover_primal(Q, np.zeros(2), ConstraintMode.FULL_3D)
        assert null_dim == 1
        assert np.allclose(q8, [1, 0, 0, 0, 0, 0, 0, 0], atol=1e-12)

    def test_noise_free_recovery(self):
        pairs, q_t = make_dataset(seed=22, n_pairs=8)
        Q = accumulate_pairs(pairs).normalized_q
        lam = solve_dual(Q, ConstraintMode.FULL_3D)
        q8, null_dim = recover_primal(Q, lam, ConstraintMode.FULL_3D)
        assert null_dim == 2  # truth plus the structural pure-dual direction
        err = calib_error(type(q_t).from_vec(q8), q_t)
        assert err.eps_r < 1e-6
        assert err.eps_t < 1e-6
        assert np.max(np.abs(eval_g(q8, ConstraintMode.FULL_3D))) < 1e-6

    def test_parallel_axes_raise_non_unique(self, rng):
        # planar body motion without planar constraints is unobservable
        rig = planar_rig(n_steps=30, seed=23)
        acc = accumulate_pairs(rig.pairs)  # full-3D accumulation
        with pytest.raises(NonUniqueSolution) as exc_info:
            solve_global(acc)
        assert exc_info.value.basis is not None
        assert exc_info.value.null_dim >= 3


class TestSolveGlobal:
    def test_empty_accumulator(self):
        with pytest.raises(EmptyData):
            solve_global(CostAccumulator())

    def test_noise_free_two_pairs(self):
        pairs, q_t = make_dataset(seed=24, n_pairs=2)
        sol = solve_global(accumulate_pairs(pairs))
        assert sol.gap < 1e-10
        assert sol.gap >= -1e-9
        assert sol.is_global
        assert sol.provenance == "global"
        err = calib_error(sol.q_hat, q_t)
        assert err.eps_r < 1e-6 and err.eps_t < 1e-6

    def test_planar_mode_noise_free(self):
        rig = planar_rig(n_steps=40, seed=25)
        g_a = plane_alignment_dq(rig.plane_a)
        g_b = plane_alignment_dq(rig.plane_b)
        acc = accumulate_pairs(rig.pairs, mode=ConstraintMode.PLANAR,
                               align_a=g_a, align_b=g_b)
        sol = solve_global(acc)
        assert sol.is_global
        q_tp = (g_a * rig.true_calib * g_b.conjugate()).canonicalized()
        err = calib_error(sol.q_hat, q_tp)
        assert err.eps_r < 1e-6 and err.eps_t < 1e-6

    def test_weak_duality_against_local_solutions(self, rng):
        for seed in (41, 42, 43):
            pairs, _ = make_dataset(seed=seed, n_pairs=50, noise=0.1)
            acc = accumulate_pairs(pairs)
            sol = solve_global(acc)
            local = solve_local(acc.normalized_q, ConstraintMode.FULL_3D,
                                LocalSolveOptions(init=random_unit_dq(rng).vec()))
            assert sol.dual_value <= local.cost + 1e-9

    def test_certificate_soundness_by_sampling(self, rng):
        pairs, _ = make_dataset(seed=44, n_pairs=80, noise=0.1)
        acc = accumulate_pairs(pairs)
        sol = solve_global(acc)
        assert sol.is_global
        Q = acc.normalized_q
        best = np.inf
        for _ in range(10_000):
            v = random_unit_dq(rng, max_translation=2.0).vec()
            best = min(best, v @ Q @ v)
        assert best >= sol.primal_cost - sol.gap - 1e-8

    def test_error_decreases_with_more_data(self):
        errs = []
        for n in (20, 200):
            pairs, q_t = make_dataset(seed=45, n_pairs=n, noise=0.1)
            sol = solve_global(accumulate_pairs(pairs))
            errs.append(calib_error(sol.q_hat, q_t).eps_t)
        assert errs[1] < errs[0]

    def test_gap_nonnegative_within_tolerance(self):
        for seed in (46, 47):
            pairs, _ = make_dataset(seed=seed, n_pairs=60, noise=0.05)
            sol = solve_global(accumulate_pairs(pairs))
            assert sol.gap >= -1e-9
