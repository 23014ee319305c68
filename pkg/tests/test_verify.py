import numpy as np
import pytest

from dqcalib.constraints import ConstraintMode
from dqcalib.cost import CostAccumulator
from dqcalib.dualquat import DualQuat
from dqcalib.errors import InfeasiblePoint
from dqcalib.global_solver import solve_global
from dqcalib.planar import plane_alignment_dq
from dqcalib.sim import planar_rig, random_unit_dq
from dqcalib.verify import VerifyOptions, certify

from conftest import accumulate_pairs, make_dataset, make_study_dataset


def yaw_perturbed(q, deg):
    delta = DualQuat.from_rot_trans([0, 0, 1], np.deg2rad(deg), [0, 0, 0])
    return (q * delta).canonicalized()


def translation_perturbed(q, meters, direction):
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    return (q * DualQuat.from_translation(meters * direction)).canonicalized()


class TestCertify:
    def test_noise_free_truth_certifies(self):
        pairs, q_t = make_dataset(seed=61, n_pairs=20)
        Q = accumulate_pairs(pairs).normalized_q
        cert = certify(Q, q_t, ConstraintMode.FULL_3D)
        assert cert.residual < 1e-9
        assert cert.gap < 1e-10
        assert cert.is_global
        assert not cert.indefinite

    def test_zero_cost_certifies_anything_feasible(self, rng):
        Q = CostAccumulator().normalized_q
        q = random_unit_dq(rng)
        cert = certify(Q, q, ConstraintMode.FULL_3D)
        assert cert.residual == 0.0
        assert cert.gap == 0.0
        assert cert.is_global

    def test_small_yaw_perturbation_flips_certificate(self):
        # vehicle-scale rig: 0.1 degree of yaw moves the cost well past the
        # gap threshold
        pairs, _ = make_study_dataset(seed=62, n_pairs=100, noise=0.05)
        acc = accumulate_pairs(pairs)
        sol = solve_global(acc)
        assert certify(acc.normalized_q, sol.q_hat, ConstraintMode.FULL_3D).is_global
        bad = yaw_perturbed(sol.q_hat, 0.1)
        cert = certify(acc.normalized_q, bad, ConstraintMode.FULL_3D)
        assert not cert.is_global

    def test_small_translation_perturbation_flips_certificate(self):
        pairs, _ = make_study_dataset(seed=63, n_pairs=100, noise=0.05)
        acc = accumulate_pairs(pairs)
        sol = solve_global(acc)
        bad = translation_perturbed(sol.q_hat, 0.1, [1, 1, 1])
        assert not certify(acc.normalized_q, bad, ConstraintMode.FULL_3D).is_global

    def test_infeasible_candidate_rejected(self, rng):
        pairs, _ = make_dataset(seed=64, n_pairs=10)
        Q = accumulate_pairs(pairs).normalized_q
        v = random_unit_dq(rng).vec()
        v[0] += 0.01  # break normalization beyond the feasibility tolerance
        with pytest.raises(InfeasiblePoint):
            certify(Q, v, ConstraintMode.FULL_3D)

    def test_monotone_falsification(self, rng):
        # the falsification measure |gap| grows with the geodesic distance
        # from the optimum (the refit lambda_1 overshoots the primal once Z
        # turns indefinite, so the raw gap changes sign but not trend);
        # checked over the small-perturbation band where falsification matters
        pairs, _ = make_dataset(seed=65, n_pairs=120, noise=0.05)
        acc = accumulate_pairs(pairs)
        sol = solve_global(acc)
        Q = acc.normalized_q
        magnitudes = np.geomspace(1e-4, 0.1, 10)
        for _ in range(10):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            tdir = rng.normal(size=3)
            tdir /= np.linalg.norm(tdir)
            gaps = []
            for m in magnitudes:
                delta = DualQuat.from_rot_trans(axis, m, 0.5 * m * tdir)
                cand = (sol.q_hat * delta).canonicalized()
                gaps.append(certify(Q, cand, ConstraintMode.FULL_3D).gap)
            measure = np.abs(gaps)
            assert np.all(np.diff(measure) >= -(1e-9 + 0.01 * measure[:-1]))

    def test_gap_independent_of_dataset_duplication(self, rng):
        pairs, _ = make_dataset(seed=66, n_pairs=40, noise=0.05)
        q = random_unit_dq(rng)
        cert1 = certify(accumulate_pairs(pairs).normalized_q, q,
                        ConstraintMode.FULL_3D)
        cert2 = certify(accumulate_pairs(pairs * 3).normalized_q, q,
                        ConstraintMode.FULL_3D)
        assert abs(cert1.gap - cert2.gap) < 1e-12

    def test_consistency_with_global_solver(self):
        for seed, noise in ((67, 0.0), (68, 0.05), (69, 0.1)):
            pairs, _ = make_dataset(seed=seed, n_pairs=60, noise=noise)
            acc = accumulate_pairs(pairs)
            sol = solve_global(acc)
            if sol.is_global:
                cert = certify(acc.normalized_q, sol.q_hat, ConstraintMode.FULL_3D)
                assert cert.is_global
                assert abs(cert.gap - sol.gap) < 1e-8

    def test_planar_mode_certification(self):
        rig = planar_rig(n_steps=50, seed=70, noise_level=0.05)
        g_a = plane_alignment_dq(rig.plane_a)
        g_b = plane_alignment_dq(rig.plane_b)
        acc = accumulate_pairs(rig.pairs, mode=ConstraintMode.PLANAR,
                               align_a=g_a, align_b=g_b)
        sol = solve_global(acc)
        cert = certify(acc.normalized_q, sol.q_hat, ConstraintMode.PLANAR)
        assert cert.is_global

    def test_options_respected(self):
        pairs, _ = make_dataset(seed=71, n_pairs=60, noise=0.05)
        acc = accumulate_pairs(pairs)
        sol = solve_global(acc)
        default = certify(acc.normalized_q, sol.q_hat, ConstraintMode.FULL_3D)
        assert default.is_global
        # an impossible residual tolerance must flip the verdict
        tight = VerifyOptions(residual_tol=1e-30, gap_threshold=1e-30)
        cert = certify(acc.normalized_q, sol.q_hat, ConstraintMode.FULL_3D, tight)
        assert not cert.is_global
