"""File formats and stream pairing.

Supported inputs: TUM trajectories ("t tx ty tz qx qy qz qw", scalar-last
quaternions on disk), 3x4 row-major pose matrices with synthesized
timestamps, whitespace xyz point clouds, and a native motion-pair JSONL
format.  Two trajectories are paired on the first stream's time grid with
screw-linear interpolation of the second stream's poses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cost import MotionPair
from .dualquat import DualQuat, quat_conj, quat_mul
from .errors import (NoOverlap, NonOrthogonalRotation, NotUnit, ParseError)

STUDY_CSV_HEADER = "noise_level,n,seed,eps_r_deg,eps_t_m,gap,time_ms"


@dataclass(frozen=True)
class Trajectory:
    sensor_id: str
    times: np.ndarray
    poses: tuple[DualQuat, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self):
        return len(self.poses)


@dataclass(frozen=True)
class PairingConfig:
    max_skew: float = 0.02
    interpolate: bool = True

    def __post_init__(self):
        if self.max_skew < 0:
            raise ValueError("max_skew must be nonnegative")


# -- screw-linear interpolation ----------------------------------------------

def _screw_power(q: DualQuat, tau: float) -> DualQuat:
    """q**tau via screw parameters; q must be unit and sign-canonical."""
    sin_half = np.linalg.norm(q.real[1:])
    t = q.translation()
    if sin_half < 1e-12:
        return DualQuat.from_translation(tau * t)
    theta = 2.0 * math.atan2(sin_half, q.real[0])
    axis = q.real[1:] / sin_half
    d = float(t @ axis)
    moment = 0.5 * (np.cross(t, axis)
                    + np.cross(axis, np.cross(t, axis)) / math.tan(theta / 2.0))
    half = 0.5 * tau * theta
    s, c = math.sin(half), math.cos(half)
    real = np.concatenate(([c], s * axis))
    dual = np.concatenate(([-0.5 * tau * d * s],
                           s * moment + 0.5 * tau * d * c * axis))
    return DualQuat(real, dual)


def sclerp(p: DualQuat, q: DualQuat, tau: float) -> DualQuat:
    """Screw-linear interpolation between unit displacements.

    Exact at the endpoints; follows the shorter of the two double-cover
    paths.
    """
    for x in (p, q):
        x._require_unit()
    if tau == 0.0:
        return p
    if tau == 1.0:
        return q
    if float(p.real @ q.real) < 0:
        q = -q
    rel = (p.conjugate() * q).canonicalized()
    return (p * _screw_power(rel, tau)).canonicalized()


# -- trajectory formats --------------------------------------------------------

def load_trajectory(path, fmt: str = "tum", rate: float = 10.0,
                    sensor_id: str | None = None) -> Trajectory:
    """Read a trajectory file; ``fmt`` is "tum" or "kitti_pose".

    Pose-matrix rotations are re-orthogonalized when they deviate mildly
    from SO(3) and rejected beyond 1e-3.
    """
    times, poses = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if fmt == "tum":
                if len(fields) != 8:
                    raise ParseError(f"expected 8 fields, got {len(fields)}",
                                     line=lineno)
                try:
                    vals = [float(x) for x in fields]
                except ValueError as err:
                    raise ParseError(str(err), line=lineno) from None
                t, tx, ty, tz, qx, qy, qz, qw = vals
                real = np.array([qw, qx, qy, qz])
                try:
                    dq = DualQuat(
                        real, 0.5 * quat_mul(np.array([0.0, tx, ty, tz]), real)
                    ).normalized().canonicalized()
                except NotUnit as err:
                    raise ParseError(str(err), line=lineno) from None
                times.append(t)
                poses.append(dq)
            elif fmt == "kitti_pose":
                if len(fields) != 12:
                    raise ParseError(f"expected 12 fields, got {len(fields)}",
                                     line=lineno)
                try:
                    vals = np.array([float(x) for x in fields]).reshape(3, 4)
                except ValueError as err:
                    raise ParseError(str(err), line=lineno) from None
                R = vals[:, :3]
                defect = max(np.max(np.abs(R.T @ R - np.eye(3))),
                             abs(np.linalg.det(R) - 1.0))
                if defect > 1e-3:
                    raise NonOrthogonalRotation(
                        f"line {lineno}: rotation defect {defect:.2e}")
                if defect > 1e-12:
                    u, _, vt = np.linalg.svd(R)
                    R = u @ vt
                T = np.eye(4)
                T[:3, :3] = R
                T[:3, 3] = vals[:, 3]
                times.append(len(poses) / rate)
                poses.append(DualQuat.from_homogeneous(T))
            else:
                raise ValueError(f"unknown trajectory format {fmt!r}")
    arr = np.asarray(times, dtype=float)
    if len(arr) > 1 and np.any(np.diff(arr) <= 0):
        bad = int(np.argmax(np.diff(arr) <= 0)) + 2
        raise ParseError("timestamps not strictly increasing", line=bad)
    return Trajectory(sensor_id=sensor_id or fmt, times=arr, poses=tuple(poses))


def save_trajectory(traj: Trajectory, path, fmt: str = "tum"):
    with open(path, "w") as fh:
        for t, pose in zip(traj.times, traj.poses):
            if fmt == "tum":
                x, y, z = pose.translation()
                qw, qx, qy, qz = pose.real
                fh.write(f"{t:.17g} {x:.17g} {y:.17g} {z:.17g} "
                         f"{qx:.17g} {qy:.17g} {qz:.17g} {qw:.17g}\n")
            elif fmt == "kitti_pose":
                T = pose.to_homogeneous()
                fh.write(" ".join(f"{v:.17g}" for v in T[:3].ravel()) + "\n")
            else:
                raise ValueError(f"unknown trajectory format {fmt!r}")


def relative_motions(traj: Trajectory) -> list[tuple[float, DualQuat]]:
    """Incremental motions in the sensor frame, stamped at interval ends.

    Folding the motions onto the first pose reproduces the trajectory.
    """
    if len(traj) < 2:
        raise ValueError("need at least two poses")
    out = []
    for i in range(len(traj) - 1):
        motion = (traj.poses[i].conjugate() * traj.poses[i + 1]).canonicalized()
        out.append((float(traj.times[i + 1]), motion))
    return out


# -- pairing --------------------------------------------------------------------

def _pose_at(traj: Trajectory, t: float, cfg: PairingConfig):
    times = traj.times
    if cfg.interpolate:
        if t < times[0] or t > times[-1]:
            return None
        idx = int(np.searchsorted(times, t, side="right")) - 1
        idx = max(0, min(idx, len(times) - 2))
        t0, t1 = times[idx], times[idx + 1]
        if t == t0:
            return traj.poses[idx]
        tau = (t - t0) / (t1 - t0)
        return sclerp(traj.poses[idx], traj.poses[idx + 1], float(tau))
    idx = int(np.searchsorted(times, t))
    candidates = [i for i in (idx - 1, idx) if 0 <= i < len(times)]
    nearest = min(candidates, key=lambda i: abs(times[i] - t))
    if abs(times[nearest] - t) > cfg.max_skew:
        return None
    return traj.poses[nearest]


def pair_streams(traj_a: Trajectory, traj_b: Trajectory,
                 cfg: PairingConfig | None = None
                 ) -> tuple[list[MotionPair], int]:
    """Motion pairs on stream a's time grid; returns (pairs, dropped count).

    Stream b's poses are screw-interpolated at a's pose times (or matched
    nearest-neighbor within ``max_skew``); a-intervals without a valid
    b-pose at both ends are dropped and counted.
    """
    cfg = cfg or PairingConfig()
    if len(traj_a) < 2 or len(traj_b) < 2:
        raise ValueError("both trajectories need at least two poses")
    if traj_a.times[0] > traj_b.times[-1] or traj_a.times[-1] < traj_b.times[0]:
        raise NoOverlap("trajectory time ranges are disjoint")
    pairs = []
    dropped = 0
    for i in range(len(traj_a) - 1):
        t0, t1 = float(traj_a.times[i]), float(traj_a.times[i + 1])
        b0 = _pose_at(traj_b, t0, cfg)
        b1 = _pose_at(traj_b, t1, cfg)
        if b0 is None or b1 is None:
            dropped += 1
            continue
        q_a = (traj_a.poses[i].conjugate() * traj_a.poses[i + 1]).canonicalized()
        q_b = (b0.conjugate() * b1).canonicalized()
        pairs.append(MotionPair(q_a=q_a, q_b=q_b, timestamp=t1))
    return pairs, dropped


# -- motion-pair JSONL -----------------------------------------------------------

def save_pairs_jsonl(pairs, path):
    with open(path, "w") as fh:
        for p in pairs:
            rec = {"t": p.timestamp,
                   "qa": list(p.q_a.vec()),
                   "qb": list(p.q_b.vec())}
            if not np.all(p.weight_diag == 1.0):
                rec["w"] = list(p.weight_diag)
            if p.eta is not None:
                rec["eta"] = p.eta
            fh.write(json.dumps(rec) + "\n")


def load_pairs_jsonl(path) -> list[MotionPair]:
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                qa = DualQuat.from_vec(rec["qa"])
                qb = DualQuat.from_vec(rec["qb"])
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as err:
                raise ParseError(str(err), line=lineno) from None
            try:
                # MotionPair validates unit-ness (1e-6 policy) and canonicalizes
                pair = MotionPair(q_a=qa, q_b=qb, timestamp=float(rec["t"]),
                                  weight_diag=rec.get("w"),
                                  eta=rec.get("eta"))
            except NotUnit as err:
                raise NotUnit(f"line {lineno}: {err}") from None
            except KeyError as err:
                raise ParseError(f"missing field {err}", line=lineno) from None
            pairs.append(pair)
    return pairs


def load_point_cloud(path) -> np.ndarray:
    """Whitespace-separated xyz rows."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ParseError(f"expected 3 fields, got {len(fields)}",
                                 line=lineno)
            try:
                rows.append([float(x) for x in fields])
            except ValueError as err:
                raise ParseError(str(err), line=lineno) from None
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def write_study_csv(rows, path):
    """Study sweep output; one dict per row keyed like the header."""
    keys = STUDY_CSV_HEADER.split(",")
    with open(path, "w") as fh:
        fh.write(STUDY_CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float)
                              else str(row[k]) for k in keys) + "\n")
