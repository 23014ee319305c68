import json

import numpy as np
import pytest

from dqcalib.cli import main
from dqcalib.dualquat import DualQuat
from dqcalib.io import STUDY_CSV_HEADER, load_pairs_jsonl, save_pairs_jsonl
from dqcalib.planar import GroundPlane
from dqcalib.sim import planar_rig

from conftest import make_dataset


@pytest.fixture
def sim_pairs_file(tmp_path):
    pairs, q_t = make_dataset(seed=101, n_pairs=25)
    path = tmp_path / "pairs.jsonl"
    save_pairs_jsonl(pairs, path)
    return path, q_t


def q8_arg(q):
    return ",".join(repr(float(v)) for v in q.vec())


def write_plane_cloud(path, plane: GroundPlane, rng, n=60):
    basis = np.linalg.svd(np.outer(plane.normal, plane.normal) - np.eye(3))[0][:, :2]
    coords = rng.uniform(-4, 4, (n, 2))
    pts = -plane.distance * plane.normal + coords @ basis.T
    path.write_text("\n".join(" ".join(f"{v:.17g}" for v in row)
                              for row in pts))


class TestCalibrate:
    def test_both_solvers_agree_noise_free(self, sim_pairs_file, capsys):
        path, q_t = sim_pairs_file
        rc = main(["--output", "json", "calibrate", "--pairs", str(path),
                   "--solver", "both", "--repeat", "1",
                   "--gt", q8_arg(q_t)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["global"]["is_global"] is True
        assert out["global"]["gap"] < 1e-9
        assert out["global"]["eps_r_deg"] < 1e-4
        assert out["global"]["eps_t_m"] < 1e-6
        agree = out["solver_agreement"]
        assert agree["eps_r_deg"] < 1e-4 and agree["eps_t_m"] < 1e-6

    def test_missing_file_exits_2(self, tmp_path, capsys):
        rc = main(["calibrate", "--pairs", str(tmp_path / "nope.jsonl")])
        assert rc == 2

    def test_text_output(self, sim_pairs_file, capsys):
        path, _ = sim_pairs_file
        rc = main(["calibrate", "--pairs", str(path), "--repeat", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "n_pairs: 25" in out

    def test_gt_pose_alternative(self, tmp_path, capsys):
        from dqcalib.sim import SimConfig, simulate_pairs

        truth = DualQuat.from_rot_trans([0, 0, 1], np.deg2rad(30), [1, 2, 0.5])
        pairs, _ = simulate_pairs(SimConfig(n_steps=20, true_calib=truth))
        path = tmp_path / "p.jsonl"
        save_pairs_jsonl(pairs, path)
        rc = main(["--output", "json", "calibrate", "--pairs", str(path),
                   "--repeat", "1", "--gt-pose", "1,2,0.5,0,0,1,30"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["global"]["eps_r_deg"] < 1e-6
        assert out["global"]["eps_t_m"] < 1e-6

    def test_degenerate_data_exits_3(self, tmp_path, capsys):
        rig = planar_rig(n_steps=20, seed=102)
        path = tmp_path / "planar_pairs.jsonl"
        save_pairs_jsonl(rig.pairs, path)
        rc = main(["calibrate", "--pairs", str(path), "--repeat", "1"])
        assert rc == 3
        err = capsys.readouterr().err
        assert "null-space" in err

    def test_fast_solver_with_bad_init_reports_non_global(self, tmp_path,
                                                          capsys):
        # a half-turn-flipped init traps the fast solver in a genuine
        # non-global stationary point; the certificate must say so and the
        # reported gap must bound the cost excess
        pairs, q_t = make_dataset(seed=107, n_pairs=30)
        path = tmp_path / "pairs.jsonl"
        save_pairs_jsonl(pairs, path)
        bad_init = (q_t * DualQuat.from_rot_trans([1, 0, 0], np.pi, [0, 0, 0])
                    ).canonicalized()
        rc = main(["--output", "json", "calibrate", "--pairs", str(path),
                   "--solver", "fast", "--repeat", "1",
                   "--init", q8_arg(bad_init)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["fast"]["is_global"] is False
        assert out["fast"]["gap"] > 1e-3

    def test_planar_pipeline_with_plane_clouds(self, tmp_path, capsys, rng):
        rig = planar_rig(n_steps=40, seed=103)
        pairs_path = tmp_path / "pairs.jsonl"
        save_pairs_jsonl(rig.pairs, pairs_path)
        pa, pb = tmp_path / "a.xyz", tmp_path / "b.xyz"
        write_plane_cloud(pa, rig.plane_a, rng)
        write_plane_cloud(pb, rig.plane_b, rng)
        rc = main(["--output", "json", "--mode", "planar", "calibrate",
                   "--pairs", str(pairs_path), "--plane-a", str(pa),
                   "--plane-b", str(pb), "--repeat", "1",
                   "--gt", q8_arg(rig.true_calib)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["global"]["is_global"] is True
        assert out["global"]["eps_r_deg"] < 1e-5
        assert out["global"]["eps_t_m"] < 1e-6


class TestCertifyCommand:
    def test_global_solution_certifies(self, sim_pairs_file, capsys):
        path, q_t = sim_pairs_file
        rc = main(["--output", "json", "certify", "--pairs", str(path),
                   "--candidate", q8_arg(q_t)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["is_global"] is True

    def test_perturbed_candidate_rejected(self, tmp_path, capsys):
        from conftest import make_study_dataset

        pairs, q_t = make_study_dataset(seed=104, n_pairs=80, noise=0.02)
        path = tmp_path / "pairs.jsonl"
        save_pairs_jsonl(pairs, path)
        shifted = (q_t * DualQuat.from_translation([0.1, 0, 0])).canonicalized()
        rc = main(["--output", "json", "certify", "--pairs", str(path),
                   "--candidate", q8_arg(shifted)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["is_global"] is False

    def test_non_unit_candidate_exits_3(self, sim_pairs_file, capsys):
        path, _ = sim_pairs_file
        rc = main(["certify", "--pairs", str(path),
                   "--candidate", "1.1,0,0,0,0,0,0,0"])
        assert rc == 3


class TestOnlineCommand:
    def test_replay_trace_columns(self, tmp_path, capsys):
        rig = planar_rig(n_steps=15, seed=105)
        path = tmp_path / "pairs.jsonl"
        save_pairs_jsonl(rig.pairs, path)
        rc = main(["online", "--pairs", str(path), "--t-no-fail", "0.3",
                   "--gt", q8_arg(rig.true_calib)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "t,eps_r_deg,eps_t_m,gap,provenance,is_global,time_ms"
        assert len(lines) == 16
        final = lines[-1].split(",")
        assert final[4] in ("local", "global")

    def test_non_monotone_timestamps_exit_2(self, tmp_path, capsys):
        pairs, _ = make_dataset(seed=106, n_pairs=4)
        import dataclasses
        pairs[2] = dataclasses.replace(pairs[2], timestamp=pairs[0].timestamp)
        path = tmp_path / "pairs.jsonl"
        save_pairs_jsonl(pairs, path)
        rc = main(["online", "--pairs", str(path)])
        assert rc == 2


class TestSimulateAndStudy:
    def test_simulate_deterministic(self, tmp_path, capsys):
        cfg = {"n_steps": 12, "seed": 5, "noise_level": 0.05}
        cfg_path = tmp_path / "sim.json"
        cfg_path.write_text(json.dumps(cfg))
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out2)]) == 0
        assert out1.read_text() == out2.read_text()
        sidecar = json.loads((tmp_path / "a.jsonl.gt.json").read_text())
        assert len(sidecar["true_calib"]) == 8
        assert len(load_pairs_jsonl(out1)) == 12

    def test_simulate_bad_config_exits_2(self, tmp_path):
        cfg_path = tmp_path / "sim.json"
        cfg_path.write_text(json.dumps({"n_steps": 5, "bogus": 1}))
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(tmp_path / "x.jsonl")]) == 2

    def test_study_row_count_and_header(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DQCALIB_THREADS", "1")
        cfg = {"noise_levels": [0.02, 0.1], "sizes": [10, 20], "seeds": 2}
        cfg_path = tmp_path / "study.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "study.csv"
        assert main(["study", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == STUDY_CSV_HEADER
        assert len(lines) == 1 + 2 * 2 * 2
