import numpy as np
import pytest
from hypothesis import strategies as st

from dqcalib.cost import CostAccumulator, MotionPair
from dqcalib.dualquat import DualQuat
from dqcalib.sim import random_unit_dq


def unit_quats():
    """Hypothesis strategy for unit quaternions, away from the zero vector."""
    comps = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
    return (
        st.tuples(comps, comps, comps, comps)
        .map(np.array)
        .filter(lambda v: np.linalg.norm(v) > 1e-2)
        .map(lambda v: v / np.linalg.norm(v))
    )


def unit_dqs(max_translation=2.0):
    """Hypothesis strategy for unit dual quaternions."""
    t_comp = st.floats(-max_translation, max_translation,
                       allow_nan=False, allow_infinity=False)

    def build(args):
        r, t = args
        from dqcalib.dualquat import quat_mul
        dual = 0.5 * quat_mul(np.concatenate(([0.0], np.array(t))), r)
        return DualQuat(r, dual)

    return st.tuples(unit_quats(), st.tuples(t_comp, t_comp, t_comp)).map(build)


def make_dataset(seed=0, n_pairs=40, noise=0.0, max_translation=1.0,
                 n_steps=None):
    """Noise-controlled full-3D dataset with a random true calibration."""
    from dqcalib.sim import SimConfig, simulate_pairs

    cfg = SimConfig(
        path={"kind": "circle", "radius": 12.0},
        surface={"kind": "sinusoid"},
        n_steps=n_steps or n_pairs,
        true_calib=random_unit_dq(np.random.default_rng(seed), max_translation),
        noise_level=noise,
        seed=seed,
    )
    return simulate_pairs(cfg)


def make_study_dataset(seed=0, n_pairs=100, noise=0.05):
    """Dataset with a vehicle-scale calibration (2-8 m sensor offset)."""
    from dqcalib.sim import SimConfig, sample_study_calibration, simulate_pairs

    calib = sample_study_calibration(np.random.default_rng(seed))
    cfg = SimConfig(n_steps=n_pairs, true_calib=calib, noise_level=noise,
                    seed=seed)
    return simulate_pairs(cfg)


def accumulate_pairs(pairs, mode=None, **kwargs):
    from dqcalib.constraints import ConstraintMode

    acc = CostAccumulator(mode or ConstraintMode.FULL_3D, **kwargs)
    for p in pairs:
        acc.add(p)
    return acc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
