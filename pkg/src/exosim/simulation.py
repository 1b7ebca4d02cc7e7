"""Closed-loop simulation of the leg under CTC, MRCTC or RMRCTC.

Two scheduling modes are available. ``zoh`` is the sampled dual-rate
controller: the model loop runs at ``slow_hz`` and its outputs are held, the
correction loop runs at ``fast_hz``, and the plant is integrated with RK4
between fast ticks. ``continuous`` evaluates both control laws inside every
integrator stage, i.e. the continuous-time closed loop; its state is stiff
(correction gains over small link inertias), so it is advanced with a
linearly implicit Rosenbrock method at the same internal step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .control import DEFAULT_INTEGRAL_CLAMP, GainSet, PidState, loop2_correction, routh_hurwitz_stable
from .dynamics import _NO_FRICTION, DynamicsError, friction_array, inverse_dynamics
from .friction import DEFAULT_OMEGA_BRK, DEFAULT_VISCOUS, FrictionParams, joint_friction_from_peaks
from .model import N_JOINTS, RobotModel, build_robot_model
from .trajectory import Trajectory

SCHEMES = {"ctc": K.SCHEME_CTC, "mrctc": K.SCHEME_MRCTC, "rmrctc": K.SCHEME_RMRCTC}
SCHEDULES = ("zoh", "continuous")
DIVERGENCE_LIMIT = 10 * 2 * math.pi


class SimulationError(RuntimeError):
    pass


class UnstableGainsError(ValueError):
    pass


class IntegrationDiverged(SimulationError):
    def __init__(self, t: float, message: str = "integration diverged"):
        super().__init__(f"{message} at t = {t:.6g} s")
        self.t = t


class SimulationDiverged(SimulationError):
    """Raised with the log recorded up to the failure."""

    def __init__(self, t: float, log: "RunLog"):
        super().__init__(f"simulation diverged at t = {t:.6g} s")
        self.t = t
        self.log = log


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray


def integrate_step(model: RobotModel, state: JointState, tau, friction=None, dt: float = 1e-3,
                   substeps: int = 10, t: float = 0.0) -> JointState:
    """RK4 over ``substeps`` equal steps with ``tau`` held; friction is
    evaluated inside every derivative call."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    fr = friction_array(friction)
    use = fr is not None
    q, qd, ok = K.rk4_held_torque(model.arrays(), np.ascontiguousarray(state.q, dtype=float),
                                  np.ascontiguousarray(state.qdot, dtype=float),
                                  np.ascontiguousarray(tau, dtype=float),
                                  fr if use else _NO_FRICTION, use, dt, substeps)
    if not ok:
        raise IntegrationDiverged(t + dt)
    return JointState(q, qd)


@dataclass(frozen=True, eq=False)
class SimConfig:
    plant: RobotModel = field(default_factory=build_robot_model)
    reference: RobotModel = field(default_factory=build_robot_model)
    gains: GainSet = field(default_factory=GainSet)
    scheme: str = "rmrctc"
    schedule: str = "continuous"
    slow_hz: int = 100
    fast_hz: int = 1000
    substeps: int = 10
    friction_enabled: bool = True
    friction: tuple | None = None      # explicit per-joint FrictionParams; None -> peak rule
    omega_brk: float = DEFAULT_OMEGA_BRK
    viscous: float = DEFAULT_VISCOUS
    friction_feedforward: bool = True
    integral_clamp: float = DEFAULT_INTEGRAL_CLAMP
    initial_offset: tuple | None = None  # plant/model start = trajectory start + offset

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; choose from {SCHEDULES}")
        if self.slow_hz <= 0 or self.fast_hz <= 0 or self.fast_hz % self.slow_hz:
            raise ValueError("fast_hz must be a positive integer multiple of slow_hz")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.friction is not None and len(self.friction) != N_JOINTS:
            raise ValueError(f"need {N_JOINTS} friction parameter sets")


COUNTERS = ("M", "G", "V", "ID")
LOG_FIELDS = ("qd", "qm", "vm", "qp", "vp", "taum", "taup", "tauf", "e")
CSV_GROUPS = ("qd", "qm", "qp", "taum", "taup", "tauf", "e")


@dataclass(eq=False)
class RunLog:
    t: np.ndarray
    qd: np.ndarray
    qm: np.ndarray
    vm: np.ndarray
    qp: np.ndarray
    vp: np.ndarray
    taum: np.ndarray
    taup: np.ndarray
    tauf: np.ndarray
    e: np.ndarray
    counters: dict
    counter_history: np.ndarray
    scheme: str
    schedule: str
    fast_hz: int
    slow_hz: int
    friction: tuple | None = None
    diverged: bool = False

    @classmethod
    def empty(cls, n: int, **meta) -> "RunLog":
        arrays = {k: np.zeros((n, N_JOINTS)) for k in LOG_FIELDS}
        return cls(t=np.zeros(n), **arrays, counters={k: 0 for k in COUNTERS},
                   counter_history=np.zeros((n, len(COUNTERS)), dtype=np.int64), **meta)

    def record_counters(self, k: int) -> None:
        self.counter_history[k] = [self.counters[c] for c in COUNTERS]

    def truncated(self, n: int) -> "RunLog":
        kw = {k: getattr(self, k)[:n].copy() for k in ("t",) + LOG_FIELDS}
        return RunLog(**kw, counters=dict(self.counters),
                      counter_history=self.counter_history[:n].copy(), scheme=self.scheme,
                      schedule=self.schedule, fast_hz=self.fast_hz, slow_hz=self.slow_hz,
                      friction=self.friction, diverged=True)

    @property
    def tracking_error(self) -> np.ndarray:
        """theta_d - theta_P per tick [rad]."""
        return self.qd - self.qp

    def max_tracking_error_deg(self) -> np.ndarray:
        return np.degrees(np.max(np.abs(self.tracking_error), axis=0))

    @property
    def simulated_time(self) -> float:
        return len(self.t) / self.fast_hz

    def counter_rates(self) -> dict:
        """Evaluations per simulated second.

        Measured over the completed slow-loop periods, so slow-rate counters
        are not inflated by a trailing partial period. A log shorter than one
        period (an early divergence) falls back to the executed ticks.
        """
        if len(self.t) == 0:
            raise SimulationError("empty log")
        ratio = self.fast_hz // self.slow_hz
        ticks = (len(self.t) // ratio) * ratio or len(self.t)
        counts = self.counter_history[ticks - 1]
        T = ticks / self.fast_hz
        return {c: float(v) / T for c, v in zip(COUNTERS, counts)}

    def write_csv(self, path) -> Path:
        path = Path(path)
        header = ["t"] + [f"{g}{j + 1}" for g in CSV_GROUPS for j in range(N_JOINTS)]
        data = np.column_stack([self.t] + [getattr(self, g) for g in CSV_GROUPS])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in data:
                w.writerow([f"{v:.9g}" for v in row])
        return path

    def metadata(self, config: dict | None = None) -> dict:
        meta = {
            "scheme": self.scheme,
            "schedule": self.schedule,
            "fast_hz": self.fast_hz,
            "slow_hz": self.slow_hz,
            "ticks": len(self.t),
            "diverged": self.diverged,
            "counters": dict(self.counters),
            "counters_per_second": self.counter_rates(),
            "max_tracking_error_deg": self.max_tracking_error_deg().tolist(),
            "max_model_plant_error_deg": np.degrees(np.max(np.abs(self.e), axis=0)).tolist(),
        }
        if self.friction is not None:
            meta["friction"] = [
                {"T_C": p.T_C, "T_brk": p.T_brk, "omega_brk": p.omega_brk, "f": p.f}
                for p in self.friction]
        if config is not None:
            meta["config"] = config
        return meta

    def write_metadata(self, path, config: dict | None = None) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.metadata(config), indent=2))
        return path


def peak_torques(model: RobotModel, traj: Trajectory) -> np.ndarray:
    """Largest |inverse-dynamics torque| per joint along the trajectory."""
    peaks = np.zeros(N_JOINTS)
    for q, qd, qdd in zip(traj.q, traj.qdot, traj.qddot):
        peaks = np.maximum(peaks, np.abs(inverse_dynamics(model, q, qd, qdd)))
    return peaks


def resolve_friction(config: SimConfig, traj: Trajectory) -> tuple | None:
    if not config.friction_enabled:
        return None
    if config.friction is not None:
        return tuple(config.friction)
    return joint_friction_from_peaks(peak_torques(config.reference, traj),
                                     config.omega_brk, config.viscous)


def _count(counters: dict, scheme: int, n: int = 1) -> None:
    counters["M"] += n
    counters["G"] += n
    if scheme != K.SCHEME_RMRCTC:
        counters["V"] += n
    if scheme == K.SCHEME_MRCTC:
        counters["ID"] += n


def run_simulation(config: SimConfig, traj: Trajectory) -> RunLog:
    verdict = routh_hurwitz_stable(config.gains)
    if not verdict.stable:
        raise UnstableGainsError(verdict.describe())
    friction = resolve_friction(config, traj)
    if config.schedule == "continuous":
        return _run_continuous(config, traj, friction)
    return _run_zoh(config, traj, friction)


def _initial(config: SimConfig, traj: Trajectory):
    q0, v0, _ = traj.profile(0.0)
    if config.initial_offset is not None:
        q0 = q0 + np.asarray(config.initial_offset, dtype=float)
    return q0, v0


def _run_continuous(config: SimConfig, traj: Trajectory, friction) -> RunLog:
    scheme = SCHEMES[config.scheme]
    fr = friction_array(friction) if friction is not None else _NO_FRICTION
    flags = np.array([scheme, friction is not None, config.friction_feedforward and friction is not None],
                     dtype=np.int64)
    gains = np.ascontiguousarray(config.gains.as_array())
    clamp = np.full(N_JOINTS, float(config.integral_clamp))
    ref, plant = config.reference.arrays(), config.plant.arrays()
    targs = traj.profile.kernel_args()

    n = int(round(traj.duration * config.fast_hz)) + 1
    dt = 1.0 / config.fast_hz
    h = dt / config.substeps
    log = RunLog.empty(n, scheme=config.scheme, schedule=config.schedule,
                       fast_hz=config.fast_hz, slow_hz=config.slow_hz, friction=friction)

    q0, v0 = _initial(config, traj)
    y = np.zeros(K.NS)
    y[0:7], y[7:14], y[14:21], y[21:28] = q0, v0, q0, v0
    N = N_JOINTS
    for k in range(n):
        t = k * dt
        f0, aux, Mp, Mr, ok = K.closed_loop_rhs(ref, plant, gains, fr, flags, targs, t, y)
        _count(log.counters, scheme)
        qd, _, _ = K.minjerk_eval(targs, t)
        log.t[k] = t
        log.qd[k] = qd
        if scheme == K.SCHEME_CTC:
            log.qm[k], log.vm[k] = qd, K.minjerk_eval(targs, t)[1]
        else:
            log.qm[k], log.vm[k] = y[0:N], y[N:2 * N]
        log.qp[k], log.vp[k] = y[2 * N:3 * N], y[3 * N:4 * N]
        log.taum[k], log.taup[k], log.tauf[k] = aux
        log.e[k] = log.qm[k] - log.qp[k]
        if not ok:
            log.record_counters(k)
            raise SimulationDiverged(t, log.truncated(k + 1))
        if k == n - 1:
            log.record_counters(k)
            break
        y, n_rhs, ok = K.closed_loop_advance(ref, plant, gains, fr, flags, targs, t, y, f0, Mp, Mr,
                                             h, config.substeps, clamp, DIVERGENCE_LIMIT)
        _count(log.counters, scheme, n_rhs)
        log.record_counters(k)
        if not ok:
            raise SimulationDiverged(t + dt, log.truncated(k + 1))
    return log


def _run_zoh(config: SimConfig, traj: Trajectory, friction) -> RunLog:
    scheme = SCHEMES[config.scheme]
    fr = friction_array(friction) if friction is not None else _NO_FRICTION
    use_fric = friction is not None
    feedforward = config.friction_feedforward and use_fric
    g = config.gains
    ref, plant = config.reference.arrays(), config.plant.arrays()
    targs = traj.profile.kernel_args()

    n = int(round(traj.duration * config.fast_hz)) + 1
    dt = 1.0 / config.fast_hz
    Ts = 1.0 / config.slow_hz
    ratio = config.fast_hz // config.slow_hz
    log = RunLog.empty(n, scheme=config.scheme, schedule=config.schedule,
                       fast_hz=config.fast_hz, slow_hz=config.slow_hz, friction=friction)
    c = log.counters

    qP, vP = _initial(config, traj)
    qM, vM = qP.copy(), vP.copy()
    pid = PidState(clamp=config.integral_clamp)
    tau_m = np.zeros(N_JOINTS)
    a_m = np.zeros(N_JOINTS)

    for k in range(n):
        t = k * dt
        qd, vd, ad = K.minjerk_eval(targs, t)

        if scheme == K.SCHEME_CTC:
            Mr = K.mass_matrix(ref, qP)
            a_cmd = ad + g.loop1_Kv * (vd - vP) + g.loop1_Kp * (qd - qP)
            tau_m = Mr @ a_cmd + K.gravity_torque(ref, qP) + K.coriolis_torque(ref, qP, vP)
            c["M"] += 1
            c["G"] += 1
            c["V"] += 1
            tau_p = tau_m
            qM, vM = qd, vd
        else:
            if scheme == K.SCHEME_RMRCTC:
                if k % ratio == 0:
                    if k > 0:
                        qM = qM + vM * Ts + 0.5 * a_m * Ts**2
                        vM = vM + a_m * Ts
                    Mr = K.mass_matrix(ref, qM)
                    Gr = K.gravity_torque(ref, qM)
                    c["M"] += 1
                    c["G"] += 1
                    a_cmd = ad + g.loop1_Kv * (vd - vM) + g.loop1_Kp * (qd - qM)
                    tau_m = Mr @ a_cmd + Gr
                    L, _ok = K.cholesky(Mr)
                    a_m = K.cho_solve(L, tau_m - Gr)
            else:
                if k > 0:
                    qM = qM + vM * dt + 0.5 * a_m * dt**2
                    vM = vM + a_m * dt
                Mr = K.mass_matrix(ref, qM)
                Gr = K.gravity_torque(ref, qM)
                Vr = K.coriolis_torque(ref, qM, vM)
                c["M"] += 1
                c["G"] += 1
                c["V"] += 1
                a_cmd = ad + g.loop1_Kv * (vd - vM) + g.loop1_Kp * (qd - qM)
                tau_m = Mr @ a_cmd + Gr + Vr
                a_m, _M, _ok = K.forward_dynamics(ref, qM, vM, tau_m, _NO_FRICTION, False)
                c["ID"] += 1
            E = qM - qP
            tau_f = K.friction(fr, vM) if feedforward else None
            tau_p = tau_m + loop2_correction(pid, E, vM - vP, dt, g, tau_f)

        log.t[k] = t
        log.qd[k], log.qm[k], log.vm[k] = qd, qM, vM
        log.qp[k], log.vp[k] = qP, vP
        log.taum[k], log.taup[k] = tau_m, tau_p
        log.tauf[k] = K.friction(fr, vP) if use_fric else 0.0
        log.e[k] = log.qm[k] - log.qp[k]
        log.record_counters(k)
        if not (np.all(np.isfinite(tau_p)) and np.all(np.abs(qM) <= DIVERGENCE_LIMIT)):
            raise SimulationDiverged(t, log.truncated(k + 1))
        if k == n - 1:
            break
        qP, vP, ok = K.rk4_held_torque(plant, qP, vP, tau_p, fr, use_fric, dt, config.substeps)
        if not ok or np.any(np.abs(qP) > DIVERGENCE_LIMIT):
            raise SimulationDiverged(t + dt, log.truncated(k + 1))
    return log


__all__ = [
    "DynamicsError", "FrictionParams", "IntegrationDiverged", "JointState", "RunLog", "SimConfig",
    "SimulationDiverged", "UnstableGainsError", "integrate_step", "peak_torques", "run_simulation",
]
