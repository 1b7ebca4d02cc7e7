"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .analysis import cost_report, cost_runs, robustness_sweep, torque_decomposition
from .anthropometry import segment_parameters, to_si, write_segment_csv
from .config import Config, ConfigError, emit, parse_config
from .friction import friction_curve, friction_params_from_peak
from .simulation import SimulationDiverged, SimulationError, UnstableGainsError, run_simulation
from .trajectory import generate_trajectory

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2
COMMANDS = ("anthro", "friction-curve", "simulate", "decompose", "sweep", "cost")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2, which is reserved here for divergence
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    common.add_argument("--mode", choices=("sequential", "simultaneous"))
    common.add_argument("--scheme", choices=("ctc", "mrctc", "rmrctc"))
    common.add_argument("--schedule", choices=("zoh", "continuous"))
    common.add_argument("--seed", type=int, help="reserved; the simulation is deterministic")

    p = _Parser(prog="exosim", description="Lower-limb exoskeleton dynamics and control")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "anthro": "segment parameters from the subject's height and weight",
        "friction-curve": "friction torque against joint velocity",
        "simulate": "closed-loop tracking run",
        "decompose": "inertial / Coriolis / gravity torque split along the trajectory",
        "sweep": "weight and height robustness sweep",
        "cost": "dynamics evaluations per simulated second for each scheme",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def _load(args) -> Config:
    text = args.config.read_text() if args.config is not None else ""
    cfg = parse_config(text)
    over = {}
    if args.mode:
        over["trajectory__mode"] = args.mode
    if args.scheme:
        over["simulation__scheme"] = args.scheme
    if args.schedule:
        over["simulation__schedule"] = args.schedule
    if args.out is not None:
        over["output__dir"] = str(args.out)
    return cfg.with_values(**over) if over else cfg


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, default=float))
    return path


def _cmd_anthro(cfg: Config, out: Path) -> int:
    path = write_segment_csv(to_si(segment_parameters(cfg.subject)), out / "segments.csv")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_friction_curve(cfg: Config, out: Path) -> int:
    fc = cfg["friction_curve"]
    p = friction_params_from_peak(fc["T_peak"], fc["omega_brk"], fc["f"])
    rows = friction_curve(p, fc["omega_max"], fc["points"])
    path = out / "friction_curve.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "T", "stribeck", "coulomb", "viscous"])
        for r in rows:
            w.writerow([f"{v:.9g}" for v in r])
    print(f"wrote {path} (T_C={p.T_C:g}, T_brk={p.T_brk:g}, omega_brk={p.omega_brk:g}, f={p.f:g})")
    return EXIT_OK


def _cmd_simulate(cfg: Config, out: Path) -> int:
    traj = generate_trajectory(cfg.trajectory_spec, cfg.get("simulation", "fast_hz"))
    code = EXIT_OK
    try:
        log = run_simulation(cfg.sim_config(), traj)
    except SimulationDiverged as exc:
        log, code = exc.log, EXIT_DIVERGED
        print(f"error: {exc}", file=sys.stderr)
    log.write_csv(out / "run.csv")
    log.write_metadata(out / "run_meta.json", cfg.as_dict())
    err = log.max_tracking_error_deg()
    print("max |theta_d - theta_P| [deg]: " + " ".join(f"{e:.4g}" for e in err))
    print(f"wrote {out / 'run.csv'} and {out / 'run_meta.json'}")
    return code


def _cmd_decompose(cfg: Config, out: Path) -> int:
    traj = generate_trajectory(cfg.trajectory_spec, cfg.get("simulation", "fast_hz"))
    series = torque_decomposition(cfg.model(), traj)
    series.write_csv(out / "torque_decomposition.csv")
    peaks = series.peak_inf_norms()
    _write_json(out / "torque_decomposition_meta.json", peaks)
    print("peak |tau| [N m]: " + ", ".join(f"{k}={v:.4g}" for k, v in peaks.items()))
    return EXIT_OK


def _cmd_sweep(cfg: Config, out: Path) -> int:
    report = robustness_sweep(cfg.sweep_grid(), cfg.sim_config(), cfg.trajectory_spec,
                              workers=cfg.get("sweep", "workers"))
    report.write(out)
    for axis, st in report.stats.items():
        print(f"{axis}: bound [deg] " + " ".join(f"{b:.4g}" for b in st.bound))
    diverged = [f"{r.axis}={r.value:g}" for r in report.runs if r.diverged]
    if diverged:
        print("diverged runs: " + ", ".join(diverged), file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_cost(cfg: Config, out: Path, schedule_given: bool) -> int:
    if not schedule_given:
        # the cost of interest is that of the sampled controller
        cfg = cfg.with_values(simulation__schedule="zoh")
    traj = generate_trajectory(cfg.trajectory_spec, cfg.get("simulation", "fast_hz"))
    table = cost_report(cost_runs(cfg.sim_config(), traj))
    table.write_csv(out / "cost.csv")
    table.write_ratios_csv(out / "cost_ratios.csv")
    for s, r in table.rates.items():
        print(f"{s:7s} " + " ".join(f"{c}={v:g}/s" for c, v in r.items()))
    diverged = [s for s, d in table.diverged.items() if d]
    if diverged:
        print("runs diverged (rates taken over the executed ticks): " + ", ".join(diverged), file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def run_command(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = _load(args)
        out = Path(cfg.get("output", "dir"))
        out.mkdir(parents=True, exist_ok=True)
        (out / "config_resolved.ini").write_text(emit(cfg))
        if args.command == "anthro":
            return _cmd_anthro(cfg, out)
        if args.command == "friction-curve":
            return _cmd_friction_curve(cfg, out)
        if args.command == "simulate":
            return _cmd_simulate(cfg, out)
        if args.command == "decompose":
            return _cmd_decompose(cfg, out)
        if args.command == "sweep":
            return _cmd_sweep(cfg, out)
        return _cmd_cost(cfg, out, args.schedule is not None)
    except (ConfigError, UnstableGainsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
