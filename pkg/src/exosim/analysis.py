"""Torque decomposition, error statistics, robustness sweep and cost reports."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import _kernels as K
from .anthropometry import NOMINAL_SUBJECT, NOMINAL_SEGMENTS, SegmentSet, SubjectProfile, scale_segments, \
    segment_parameters, to_si
from .model import N_JOINTS, RobotModel, build_robot_model
from .simulation import COUNTERS, RunLog, SimConfig, SimulationDiverged, resolve_friction, run_simulation
from .trajectory import Trajectory, TrajectorySpec, generate_trajectory

SWEEP_WEIGHTS_LB = (150.0, 160.0, 170.0, 180.0, 190.0, 200.0)
SWEEP_HEIGHTS_IN = (50.0, 55.0, 60.0, 65.0, 70.0, 75.0)
DEFAULT_BIN_WIDTH_DEG = 0.05
MAPPINGS = ("scaled", "contini")
AXES = ("weight", "height")


def _fmt(v) -> str:
    return f"{float(v):.9g}"


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


# ---------------------------------------------------------------------------
# torque decomposition

@dataclass(frozen=True, eq=False)
class TorqueSeries:
    """Per-sample inertial, Coriolis/centrifugal and gravity torques."""

    t: np.ndarray
    inertial: np.ndarray
    coriolis: np.ndarray
    gravitational: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.inertial + self.coriolis + self.gravitational

    def peak_inf_norms(self) -> dict:
        """Max over time of the joint-space infinity norm of each component."""
        return {name: float(np.max(np.abs(getattr(self, name))))
                for name in ("inertial", "coriolis", "gravitational", "total")}

    def write_csv(self, path) -> Path:
        groups = ("inertial", "coriolis", "gravitational", "total")
        header = ["t"] + [f"{g}{j + 1}" for g in groups for j in range(N_JOINTS)]
        data = np.column_stack([self.t] + [getattr(self, g) for g in groups])
        return _write_rows(path, header, ([float(v) for v in row] for row in data))


def torque_decomposition(model: RobotModel, traj: Trajectory) -> TorqueSeries:
    """M(q_d) qdd_d, V(q_d, qd_d) and G(q_d) at every trajectory sample."""
    arrs = model.arrays()
    n = len(traj.times)
    inertial = np.empty((n, N_JOINTS))
    coriolis = np.empty((n, N_JOINTS))
    grav = np.empty((n, N_JOINTS))
    for i in range(n):
        q = np.ascontiguousarray(traj.q[i])
        inertial[i] = K.mass_matrix(arrs, q) @ traj.qddot[i]
        coriolis[i] = K.coriolis_torque(arrs, q, np.ascontiguousarray(traj.qdot[i]))
        grav[i] = K.gravity_torque(arrs, q)
    return TorqueSeries(traj.times.copy(), inertial, coriolis, grav)


# ---------------------------------------------------------------------------
# error statistics

@dataclass(frozen=True, eq=False)
class ErrorStats:
    median: np.ndarray
    std: np.ndarray
    bound: np.ndarray
    n_samples: int = 0

    def rows(self, axis: str):
        for j in range(len(self.median)):
            yield (j + 1, axis, float(self.median[j]), float(self.std[j]), float(self.bound[j]))


def _per_joint(errors) -> list[np.ndarray]:
    if isinstance(errors, np.ndarray) and errors.ndim == 2:
        return [errors[:, j] for j in range(errors.shape[1])]
    if isinstance(errors, np.ndarray) and errors.ndim == 1:
        return [errors]
    cols = [np.asarray(c, dtype=float).ravel() for c in errors]
    if cols and all(c.ndim == 1 and c.size == 1 for c in cols):
        # a flat list of scalars is one joint's samples
        return [np.concatenate(cols)]
    return cols


def error_stats(errors) -> ErrorStats:
    """Median, sample standard deviation and |median| + 3 std per joint.

    ``errors`` is an (n_samples, n_joints) array, one 1-D sample array, or a
    sequence of per-joint sample arrays (degrees).
    """
    cols = _per_joint(errors)
    if not cols:
        raise ValueError("no error samples")
    med, sd = [], []
    for j, c in enumerate(cols):
        if c.size < 2:
            raise ValueError(f"joint {j + 1}: need at least 2 samples, got {c.size}")
        med.append(np.median(c))
        sd.append(np.std(c, ddof=1))
    med = np.array(med)
    sd = np.array(sd)
    return ErrorStats(med, sd, np.abs(med) + 3 * sd, int(min(c.size for c in cols)))


@dataclass(frozen=True, eq=False)
class Histogram:
    joint: np.ndarray
    bin_low: np.ndarray
    bin_high: np.ndarray
    count: np.ndarray

    def rows(self):
        return zip(self.joint.tolist(), self.bin_low, self.bin_high, self.count.tolist())

    def write_csv(self, path) -> Path:
        return _write_rows(path, ["joint", "bin_low", "bin_high", "count"], self.rows())


def error_histogram(errors, bin_width: float = DEFAULT_BIN_WIDTH_DEG) -> Histogram:
    """Contiguous fixed-width bins per joint, anchored at multiples of the width."""
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    joints, lows, highs, counts = [], [], [], []
    for j, c in enumerate(_per_joint(errors)):
        c = c[np.isfinite(c)]
        if c.size == 0:
            continue
        idx = np.floor(c / bin_width).astype(np.int64)
        lo, hi = idx.min(), idx.max()
        cnt = np.bincount(idx - lo, minlength=hi - lo + 1)
        k = np.arange(lo, hi + 1)
        joints.append(np.full(k.size, j + 1))
        lows.append(k * bin_width)
        highs.append((k + 1) * bin_width)
        counts.append(cnt)
    if not joints:
        raise ValueError("no finite error samples")
    return Histogram(np.concatenate(joints), np.concatenate(lows), np.concatenate(highs),
                     np.concatenate(counts))


# ---------------------------------------------------------------------------
# robustness sweep

@dataclass(frozen=True)
class SweepGrid:
    weights: tuple = SWEEP_WEIGHTS_LB
    heights: tuple = SWEEP_HEIGHTS_IN
    nominal: SubjectProfile = NOMINAL_SUBJECT
    mapping: str = "scaled"
    bin_width: float = DEFAULT_BIN_WIDTH_DEG
    base: SegmentSet = NOMINAL_SEGMENTS          # plant segments of the nominal subject (scaled mode)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "heights", tuple(float(h) for h in self.heights))
        if not self.weights or not self.heights:
            raise ValueError("sweep grid needs at least one weight and one height")
        if any(v <= 0 for v in self.weights + self.heights):
            raise ValueError("sweep weights and heights must be positive")
        if self.mapping not in MAPPINGS:
            raise ValueError(f"unknown mapping {self.mapping!r}; choose from {MAPPINGS}")
        if not self.bin_width > 0:
            raise ValueError("bin width must be positive")

    def points(self) -> list[tuple[str, float, SubjectProfile]]:
        pts = [("weight", w, SubjectProfile(self.nominal.height_in, w)) for w in self.weights]
        pts += [("height", h, SubjectProfile(h, self.nominal.weight_lb)) for h in self.heights]
        return pts


def plant_segments(subject: SubjectProfile, mapping: str = "scaled",
                   nominal: SubjectProfile = NOMINAL_SUBJECT, base: SegmentSet = NOMINAL_SEGMENTS) -> SegmentSet:
    """Plant segment set for a swept subject.

    ``scaled`` keeps the nominal subject exactly at the base set; ``contini``
    uses the regression equations at the subject.
    """
    if mapping == "scaled":
        return scale_segments(base, subject.weight_lb / nominal.weight_lb,
                              subject.height_in / nominal.height_in)
    if mapping == "contini":
        return to_si(segment_parameters(subject))
    raise ValueError(f"unknown mapping {mapping!r}")


@dataclass(frozen=True, eq=False)
class SweepRun:
    axis: str
    value: float
    diverged: bool
    diverged_at: float | None
    errors_deg: np.ndarray      # (ticks, 7) theta_d - theta_P; partial for diverged runs

    @property
    def max_abs_error_deg(self) -> np.ndarray:
        if self.errors_deg.size == 0:
            return np.full(N_JOINTS, np.nan)
        return np.max(np.abs(self.errors_deg), axis=0)


@dataclass(frozen=True, eq=False)
class SweepReport:
    grid: SweepGrid
    runs: list
    stats: dict
    histograms: dict

    def stats_rows(self):
        for axis in AXES:
            if axis in self.stats:
                yield from self.stats[axis].rows(axis)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [_write_rows(out / "sweep_stats.csv",
                             ["joint", "axis", "median_deg", "std_deg", "bound_deg"], self.stats_rows())]
        for axis, hist in self.histograms.items():
            paths.append(hist.write_csv(out / f"sweep_hist_{axis}.csv"))
        header = ["axis", "value", "diverged", "diverged_at"] + [f"max_err{j + 1}_deg" for j in range(N_JOINTS)]
        rows = ([r.axis, float(r.value), int(r.diverged), "" if r.diverged_at is None else float(r.diverged_at)]
                + [float(v) for v in r.max_abs_error_deg] for r in self.runs)
        paths.append(_write_rows(out / "sweep_runs.csv", header, rows))
        return paths


def _sweep_point(args) -> SweepRun:
    axis, value, subject, grid, config, traj = args
    plant = build_robot_model(plant_segments(subject, grid.mapping, grid.nominal, grid.base),
                              gravity=config.plant.gravity)
    try:
        log = run_simulation(replace(config, plant=plant), traj)
        diverged, at = False, None
    except SimulationDiverged as exc:
        log, diverged, at = exc.log, True, exc.t
    return SweepRun(axis, value, diverged, at, np.degrees(log.tracking_error))


def robustness_sweep(grid: SweepGrid, base_config: SimConfig, traj_spec: TrajectorySpec | Trajectory,
                     workers: int = 1) -> SweepReport:
    """Run every grid point with a rebuilt plant and the nominal reference model.

    Friction parameters are resolved once from the reference model, so every
    point sees the same friction law. Diverged runs are kept in the report but
    excluded from the statistics.
    """
    traj = traj_spec if isinstance(traj_spec, Trajectory) else generate_trajectory(traj_spec, base_config.fast_hz)
    friction = resolve_friction(base_config, traj)
    config = replace(base_config, friction=friction, friction_enabled=friction is not None)
    jobs = [(axis, v, subj, grid, config, traj) for axis, v, subj in grid.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_point, jobs))
    else:
        runs = [_sweep_point(j) for j in jobs]
    runs.sort(key=lambda r: (AXES.index(r.axis), r.value))

    stats, hists = {}, {}
    for axis in AXES:
        ok = [r.errors_deg for r in runs if r.axis == axis and not r.diverged]
        if not ok:
            nan = np.full(N_JOINTS, np.nan)
            stats[axis] = ErrorStats(nan, nan, nan, 0)
            continue
        pooled = np.concatenate(ok)
        stats[axis] = error_stats(pooled)
        hists[axis] = error_histogram(pooled, grid.bin_width)
    return SweepReport(grid, runs, stats, hists)


# ---------------------------------------------------------------------------
# controller cost

@dataclass(frozen=True)
class CostTable:
    rates: dict          # scheme -> {counter: evaluations per simulated second}
    ratios: dict         # "rmrctc_vs_<other>" -> {counter: other / rmrctc}
    diverged: dict = field(default_factory=dict)

    def write_csv(self, path) -> Path:
        rows = ([s] + [float(r[c]) for c in COUNTERS] for s, r in self.rates.items())
        return _write_rows(path, ["scheme", "M_per_s", "G_per_s", "V_per_s", "ID_per_s"], rows)

    def write_ratios_csv(self, path) -> Path:
        rows = ([k] + [float(r[c]) for c in COUNTERS] for k, r in self.ratios.items())
        return _write_rows(path, ["comparison", "M", "G", "V", "ID"], rows)


def _ratio(other: float, mine: float) -> float:
    if mine == 0:
        return math.inf if other > 0 else math.nan
    return other / mine


def cost_report(logs: Mapping[str, RunLog] | Iterable[RunLog]) -> CostTable:
    """Evaluation counts per simulated second for each scheme.

    Ratios are reduction factors of RMRCTC relative to each other scheme.
    """
    if isinstance(logs, Mapping):
        logs = list(logs.values())
    rates, diverged = {}, {}
    for log in logs:
        rates[log.scheme] = log.counter_rates()
        diverged[log.scheme] = log.diverged
    ratios = {}
    if "rmrctc" in rates:
        mine = rates["rmrctc"]
        for other in ("ctc", "mrctc"):
            if other in rates:
                ratios[f"rmrctc_vs_{other}"] = {c: _ratio(rates[other][c], mine[c]) for c in COUNTERS}
    return CostTable(rates, ratios, diverged)


def cost_runs(base_config: SimConfig, traj: Trajectory, schemes=("ctc", "mrctc", "rmrctc")) -> dict:
    """Run each scheme with the base configuration; diverged runs keep their partial log."""
    logs = {}
    for s in schemes:
        try:
            logs[s] = run_simulation(replace(base_config, scheme=s), traj)
        except SimulationDiverged as exc:
            logs[s] = exc.log
    return logs
