"""Command-line interface: calibrate, online, simulate, study, certify.

Exit codes: 0 success, 1 solver failure, 2 parse/config error,
3 degenerate data or infeasible candidate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import errors
from .constraints import ConstraintMode
from .cost import CostAccumulator
from .dualquat import DualQuat
from .global_solver import DualSolveOptions, solve_global
from .io import (load_pairs_jsonl, load_point_cloud, save_pairs_jsonl,
                 write_study_csv)
from .local_solver import LocalSolveOptions, solve_local
from .metrics import calib_error
from .online import OnlineCalibrator, OnlineConfig
from .planar import RansacOptions, fit_ground_plane, lift_calibration, plane_alignment_dq
from .sim import SimConfig, sample_study_calibration, simulate_pairs
from .verify import VerifyOptions, certify

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_PARSE = 2
EXIT_DEGENERATE = 3


def _parse_q8(text: str) -> DualQuat:
    vals = [float(x) for x in text.split(",")]
    if len(vals) != 8:
        raise ValueError(f"expected 8 comma-separated floats, got {len(vals)}")
    return DualQuat.from_vec(vals).normalized().canonicalized()


def _parse_gt_pose(text: str) -> DualQuat:
    vals = [float(x) for x in text.split(",")]
    if len(vals) != 7:
        raise ValueError("expected tx,ty,tz,ax,ay,az,angle_deg")
    tx, ty, tz, ax, ay, az, angle_deg = vals
    axis = np.array([ax, ay, az])
    n = np.linalg.norm(axis)
    if angle_deg != 0.0:
        axis = axis / n
    return DualQuat.from_rot_trans(axis, np.deg2rad(angle_deg), [tx, ty, tz])


def _mode(args) -> ConstraintMode:
    return ConstraintMode.PLANAR if args.mode == "planar" else ConstraintMode.FULL_3D


def _alignments(args):
    if not getattr(args, "plane_a", None):
        return None, None
    opts = RansacOptions(seed=args.seed)
    plane_a = fit_ground_plane(load_point_cloud(args.plane_a), opts)
    plane_b = fit_ground_plane(load_point_cloud(args.plane_b), opts)
    return plane_a, plane_b


def _ground_truth(args) -> DualQuat | None:
    if getattr(args, "gt", None):
        return _parse_q8(args.gt)
    if getattr(args, "gt_pose", None):
        return _parse_gt_pose(args.gt_pose)
    return None


def _describe_solution(q_hat: DualQuat) -> dict:
    axis, angle, t = q_hat.to_rot_trans()
    return {
        "q_hat": [float(v) for v in q_hat.vec()],
        "axis": [float(v) for v in axis],
        "angle_deg": float(np.degrees(angle)),
        "translation_m": [float(v) for v in t],
    }


def _emit(args, payload: dict):
    if args.output == "json":
        print(json.dumps(payload, indent=2, default=str))
        return
    for key, value in payload.items():
        if isinstance(value, float):
            print(f"{key}: {value:.9g}")
        else:
            print(f"{key}: {value}")


def _median_time_ms(fn, repeats: int) -> tuple[object, float]:
    result = None
    samples = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return result, float(np.median(samples))


# -- subcommands ----------------------------------------------------------------

def cmd_calibrate(args) -> int:
    pairs = load_pairs_jsonl(args.pairs)
    if not pairs:
        raise errors.EmptyData("no pairs in input file")
    plane_a, plane_b = _alignments(args)
    mode = _mode(args)
    if plane_a is not None:
        mode = ConstraintMode.PLANAR
    align_a = plane_alignment_dq(plane_a) if plane_a else None
    align_b = plane_alignment_dq(plane_b) if plane_b else None

    acc = CostAccumulator(mode, align_a=align_a, align_b=align_b)
    for p in pairs:
        acc.add(p)
    Q = acc.normalized_q
    verify_opts = VerifyOptions(gap_threshold=args.gap_threshold)

    payload = {"n_pairs": len(pairs), "mode": mode.value}
    solutions = {}
    if args.solver in ("global", "both"):
        sol, ms = _median_time_ms(
            lambda: solve_global(acc, DualSolveOptions(), args.gap_threshold),
            args.repeat)
        solutions["global"] = (sol.q_hat, sol.primal_cost, sol.gap,
                               sol.is_global, ms)
    if args.solver in ("fast", "both"):
        init = _parse_q8(args.init).vec() if args.init else None
        opts = LocalSolveOptions(init=init)
        local, ms = _median_time_ms(lambda: solve_local(Q, mode, opts),
                                    args.repeat)
        cert = certify(Q, local.q_hat, mode, verify_opts)
        solutions["fast"] = (local.q_hat, local.cost, cert.gap,
                             cert.is_global, ms)

    gt = _ground_truth(args)
    for name, (q_hat, cost, gap, is_global, ms) in solutions.items():
        entry = _describe_solution(_maybe_lift(q_hat, align_a, align_b))
        entry.update(cost=float(cost), gap=float(gap), is_global=bool(is_global),
                     time_ms=ms)
        if gt is not None:
            err = calib_error(_maybe_lift(q_hat, align_a, align_b), gt)
            entry.update(eps_r_deg=err.eps_r_deg, eps_t_m=err.eps_t)
        payload[name] = entry
    if len(solutions) == 2:
        d = calib_error(solutions["global"][0], solutions["fast"][0])
        payload["solver_agreement"] = {"eps_r_deg": d.eps_r_deg,
                                       "eps_t_m": d.eps_t}
    _emit(args, payload)
    return EXIT_OK


def _maybe_lift(q_hat, align_a, align_b):
    if align_a is None:
        return q_hat
    return lift_calibration(q_hat, align_a, align_b)


def cmd_online(args) -> int:
    pairs = load_pairs_jsonl(args.pairs)
    plane_a, plane_b = _alignments(args)
    mode = ConstraintMode.PLANAR if plane_a is not None else _mode(args)
    config = OnlineConfig(mode=mode, t_no_fail=args.t_no_fail,
                          plane_a=plane_a, plane_b=plane_b,
                          verify_opts=VerifyOptions(
                              gap_threshold=args.gap_threshold))
    gt = _ground_truth(args)
    calib = OnlineCalibrator(config)
    print("t,eps_r_deg,eps_t_m,gap,provenance,is_global,time_ms")
    last = None
    for pair in pairs:
        sol = calib.update(pair)
        last = sol
        if gt is not None:
            err = calib_error(sol.q_hat, gt)
            eps_r, eps_t = err.eps_r_deg, err.eps_t
        else:
            eps_r, eps_t = float("nan"), float("nan")
        print(f"{pair.timestamp:.6f},{eps_r:.9g},{eps_t:.9g},{sol.gap:.9g},"
              f"{sol.provenance},{sol.is_global},{sol.solve_time * 1e3:.3f}")
    if last is not None:
        summary = {"final": _describe_solution(last.q_hat),
                   "provenance": last.provenance,
                   "is_global": last.is_global,
                   "degenerate": last.degenerate}
        print("# " + json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def _sim_config_from_dict(cfg: dict, seed_override=None) -> SimConfig:
    known = {"path", "surface", "step_length", "n_steps", "noise_level",
             "seed", "rate"}
    unknown = set(cfg) - known - {"true_calib"}
    if unknown:
        raise ValueError(f"unknown simulate config keys: {sorted(unknown)}")
    kwargs = {k: cfg[k] for k in known if k in cfg}
    if isinstance(kwargs.get("noise_level"), list):
        kwargs["noise_level"] = tuple(kwargs["noise_level"])
    if "true_calib" in cfg and cfg["true_calib"] is not None:
        kwargs["true_calib"] = DualQuat.from_vec(
            cfg["true_calib"]).normalized().canonicalized()
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return SimConfig(**kwargs)


def cmd_simulate(args) -> int:
    with open(args.config) as fh:
        cfg_dict = json.load(fh)
    config = _sim_config_from_dict(cfg_dict)
    pairs, truth = simulate_pairs(config)
    save_pairs_jsonl(pairs, args.out)
    sidecar = {
        "true_calib": list(truth.vec()),
        "seed": config.seed,
        "noise_level": config.noise_level,
        "n_pairs": len(pairs),
    }
    with open(str(args.out) + ".gt.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return EXIT_OK


def study_cell(noise_level, n, seed, base: dict) -> dict:
    """One study sweep cell; module-level so worker processes can import it."""
    import dataclasses

    calib = sample_study_calibration(np.random.default_rng(seed))
    cfg = _sim_config_from_dict({**base, "n_steps": int(n), "seed": int(seed),
                                 "noise_level": noise_level})
    cfg = dataclasses.replace(cfg, true_calib=calib)
    pairs, truth = simulate_pairs(cfg)
    acc = CostAccumulator()
    for p in pairs:
        acc.add(p)
    t0 = time.perf_counter()
    sol = solve_global(acc)
    elapsed_ms = (time.perf_counter() - t0) * 1e3
    err = calib_error(sol.q_hat, truth)
    return {"noise_level": noise_level, "n": int(n), "seed": int(seed),
            "eps_r_deg": err.eps_r_deg, "eps_t_m": err.eps_t,
            "gap": sol.gap, "time_ms": elapsed_ms}


def cmd_study(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    noise_levels = cfg.get("noise_levels", [0.02, 0.05, 0.10])
    sizes = cfg.get("sizes", [25, 50, 100, 200, 400])
    n_seeds = int(cfg.get("seeds", 8))
    base_seed = int(cfg.get("base_seed", 0))
    base = {k: cfg[k] for k in ("path", "surface", "step_length", "rate")
            if k in cfg}

    cells = [(nl, n, base_seed + 1000 * i)
             for nl in noise_levels for n in sizes for i in range(n_seeds)]
    workers = int(os.environ.get("DQCALIB_THREADS", "0")) or min(
        os.cpu_count() or 1, 8)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_study_cell_star,
                                 [(nl, n, s, base) for nl, n, s in cells]))
    else:
        rows = [study_cell(nl, n, s, base) for nl, n, s in cells]
    write_study_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _study_cell_star(params):
    return study_cell(*params)


def cmd_certify(args) -> int:
    pairs = load_pairs_jsonl(args.pairs)
    if not pairs:
        raise errors.EmptyData("no pairs in input file")
    mode = _mode(args)
    acc = CostAccumulator(mode)
    for p in pairs:
        acc.add(p)
    candidate = _parse_q8(args.candidate)
    cert = certify(acc.normalized_q, candidate, mode,
                   VerifyOptions(gap_threshold=args.gap_threshold))
    _emit(args, {
        "gap": cert.gap,
        "residual": cert.residual,
        "min_eig": cert.min_eig,
        "is_global": cert.is_global,
        "indefinite": cert.indefinite,
    })
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqcalib",
        description="Extrinsic calibration from per-sensor ego-motion "
                    "using dual quaternions")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=["3d", "planar"], default="3d")
    parser.add_argument("--gap-threshold", type=float, default=1e-6)
    parser.add_argument("--output", choices=["text", "json"], default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="batch calibration from a pair file")
    cal.add_argument("--pairs", required=True)
    cal.add_argument("--plane-a")
    cal.add_argument("--plane-b")
    cal.add_argument("--solver", choices=["global", "fast", "both"],
                     default="global")
    cal.add_argument("--init", help="8 comma-separated floats")
    cal.add_argument("--gt", help="8 comma-separated floats")
    cal.add_argument("--gt-pose", help="tx,ty,tz,ax,ay,az,angle_deg")
    cal.add_argument("--repeat", type=int, default=10,
                     help="timing repetitions (median reported)")
    cal.set_defaults(func=cmd_calibrate)

    onl = sub.add_parser("online", help="sequential replay with fallback")
    onl.add_argument("--pairs", required=True)
    onl.add_argument("--t-no-fail", type=float, default=5.0)
    onl.add_argument("--plane-a")
    onl.add_argument("--plane-b")
    onl.add_argument("--gt")
    onl.add_argument("--gt-pose")
    onl.set_defaults(func=cmd_online)

    simp = sub.add_parser("simulate", help="generate a synthetic pair file")
    simp.add_argument("--config", required=True)
    simp.add_argument("--out", required=True)
    simp.set_defaults(func=cmd_simulate)

    stu = sub.add_parser("study", help="noise/size sweep to CSV")
    stu.add_argument("--config", required=True)
    stu.add_argument("--out", required=True)
    stu.set_defaults(func=cmd_study)

    cer = sub.add_parser("certify", help="globality certificate for a candidate")
    cer.add_argument("--pairs", required=True)
    cer.add_argument("--candidate", required=True,
                     help="8 comma-separated floats")
    cer.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (errors.ParseError, errors.NonOrthogonalRotation, FileNotFoundError,
            json.JSONDecodeError, ValueError, errors.NonMonotonicTime,
            errors.EmptyData) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except errors.NonUniqueSolution as err:
        print(f"degenerate data: {err}", file=sys.stderr)
        if err.basis is not None:
            print("unobservable directions (null-space basis columns):",
                  file=sys.stderr)
            for row in np.array2string(err.basis, precision=6).splitlines():
                print("  " + row, file=sys.stderr)
        return EXIT_DEGENERATE
    except (errors.InfeasiblePoint, errors.NotUnit) as err:
        print(f"infeasible candidate: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except errors.DQCalibError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
