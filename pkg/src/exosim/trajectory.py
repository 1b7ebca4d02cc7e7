"""Minimum-jerk joint trajectories inside anatomical ranges of motion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import JOINT_NAMES, N_JOINTS

# (positive limit, negative limit) in degrees; positive direction first.
RANGE_OF_MOTION_DEG = {
    "hip_abduction": (45.0, 30.0),     # abduction / adduction
    "hip_flexion": (120.0, 30.0),      # flexion / extension
    "hip_rotation": (45.0, 45.0),      # internal / external
    "knee_flexion": (135.0, 0.0),      # flexion / (limited) extension
    "knee_rotation": (30.0, 30.0),     # internal / external
    "ankle_flexion": (20.0, 50.0),     # dorsiflexion / plantarflexion
    "ankle_inversion": (35.0, 15.0),   # inversion / eversion
}

# out-and-back amplitudes covering at least half of each joint's range
DEFAULT_AMPLITUDES_DEG = (40.0, 80.0, 45.0, 70.0, 30.0, -36.0, 26.0)


class TrajectoryError(ValueError):
    pass


def rom_span_deg(joint: int) -> float:
    pos, neg = RANGE_OF_MOTION_DEG[JOINT_NAMES[joint]]
    return pos + neg


def check_rom(amplitudes_rad) -> None:
    for j, a in enumerate(np.degrees(np.asarray(amplitudes_rad, dtype=float))):
        name = JOINT_NAMES[j]
        pos, neg = RANGE_OF_MOTION_DEG[name]
        if a > pos + 1e-9:
            raise TrajectoryError(f"joint {j + 1} ({name}): amplitude {a:.4g} deg exceeds the {pos:g} deg limit")
        if a < -neg - 1e-9:
            raise TrajectoryError(f"joint {j + 1} ({name}): amplitude {a:.4g} deg exceeds the -{neg:g} deg limit")


@dataclass(frozen=True)
class TrajectorySpec:
    mode: str = "sequential"
    amplitudes: tuple = tuple(np.radians(DEFAULT_AMPLITUDES_DEG))
    motion_time: tuple = (1.5,) * N_JOINTS
    dwell: float = 0.5
    total_duration: float | None = None
    return_home: bool = True

    def __post_init__(self):
        if self.mode not in ("sequential", "simultaneous"):
            raise TrajectoryError(f"unknown trajectory mode {self.mode!r}")
        amps = tuple(float(a) for a in np.broadcast_to(self.amplitudes, (N_JOINTS,)))
        times = tuple(float(t) for t in np.broadcast_to(self.motion_time, (N_JOINTS,)))
        if any(t <= 0 for t in times):
            raise TrajectoryError("motion times must be positive")
        if self.dwell < 0:
            raise TrajectoryError("dwell must be non-negative")
        check_rom(amps)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "motion_time", times)


@dataclass(frozen=True, eq=False)
class Profile:
    """Quintic segments per joint, evaluable at any time."""

    base: np.ndarray
    start: np.ndarray
    dur: np.ndarray
    q0: np.ndarray
    dq: np.ndarray
    nseg: np.ndarray
    duration: float

    def kernel_args(self):
        return (self.base, self.start, self.dur, self.q0, self.dq, self.nseg)

    def __call__(self, t: float):
        return K.minjerk_eval(self.kernel_args(), float(t))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    profile: Profile = field(repr=False)

    @property
    def duration(self) -> float:
        return self.profile.duration


def _build_profile(spec: TrajectorySpec) -> Profile:
    nmax = 2 if spec.return_home else 1
    start = np.zeros((N_JOINTS, nmax))
    dur = np.ones((N_JOINTS, nmax))
    q0 = np.zeros((N_JOINTS, nmax))
    dq = np.zeros((N_JOINTS, nmax))
    nseg = np.zeros(N_JOINTS, dtype=np.int64)

    t = 0.0
    end = 0.0
    for j in range(N_JOINTS):
        a, T = spec.amplitudes[j], spec.motion_time[j]
        t0 = t if spec.mode == "sequential" else 0.0
        segs = [(t0, T, 0.0, a)]
        if spec.return_home:
            segs.append((t0 + T + spec.dwell, T, a, -a))
        for k, s in enumerate(segs):
            start[j, k], dur[j, k], q0[j, k], dq[j, k] = s
        nseg[j] = len(segs)
        j_end = segs[-1][0] + segs[-1][1]
        end = max(end, j_end)
        if spec.mode == "sequential":
            t = j_end + spec.dwell
    needed = end + spec.dwell
    duration = needed if spec.total_duration is None else float(spec.total_duration)
    if duration < end:
        raise TrajectoryError(f"total duration {duration} s is shorter than the motions ({end:.4g} s)")
    return Profile(np.zeros(N_JOINTS), start, dur, q0, dq, nseg, duration)


def generate_trajectory(spec: TrajectorySpec, sample_rate: float = 1000.0) -> Trajectory:
    """Sample the minimum-jerk profiles (analytic derivatives) on a uniform grid."""
    prof = _build_profile(spec)
    n = int(round(prof.duration * sample_rate)) + 1
    times = np.arange(n) / sample_rate
    q = np.empty((n, N_JOINTS))
    qd = np.empty((n, N_JOINTS))
    qdd = np.empty((n, N_JOINTS))
    args = prof.kernel_args()
    for i, t in enumerate(times):
        q[i], qd[i], qdd[i] = K.minjerk_eval(args, t)
    return Trajectory(times, q, qd, qdd, prof)
