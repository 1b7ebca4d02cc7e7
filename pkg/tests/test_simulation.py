import csv
import json

import numpy as np
import pytest

from exosim.control import GainSet, PidState, loop2_correction
from exosim.friction import friction_torque
from exosim.simulation import (
    SimConfig, SimulationDiverged, SimulationError, UnstableGainsError, run_simulation,
)
from exosim.trajectory import DEFAULT_AMPLITUDES_DEG, TrajectorySpec, generate_trajectory

SMALL = GainSet(20.0, 10.0, 20.0, 5.0, 0.5)


def short_traj(mode="simultaneous", scale=0.5, motion_time=0.4, dwell=0.05, fast_hz=1000):
    amps = tuple(scale * np.radians(DEFAULT_AMPLITUDES_DEG))
    return generate_trajectory(TrajectorySpec(mode=mode, amplitudes=amps, motion_time=motion_time,
                                              dwell=dwell), fast_hz)


@pytest.fixture(scope="module")
def traj():
    return short_traj()


@pytest.fixture(scope="module")
def continuous_log():
    return run_simulation(SimConfig(friction_enabled=False),
                          generate_trajectory(TrajectorySpec(mode="simultaneous")))


def test_frictionless_tracking_within_hundredth_degree(continuous_log):
    assert continuous_log.max_tracking_error_deg().max() <= 0.01


def test_rmrctc_never_evaluates_coriolis(continuous_log):
    assert continuous_log.counters["V"] == 0
    assert continuous_log.counters["M"] > 0 and continuous_log.counters["ID"] == 0


def test_model_plant_error_is_logged_exactly(continuous_log):
    np.testing.assert_array_equal(continuous_log.e, continuous_log.qm - continuous_log.qp)


def test_runs_are_bit_identical(traj):
    cfg = SimConfig(schedule="zoh", gains=SMALL)
    a, b = run_simulation(cfg, traj), run_simulation(cfg, traj)
    for name in ("t", "qd", "qm", "qp", "taum", "taup", "tauf", "e"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.counters == b.counters


@pytest.mark.parametrize("schedule", ["continuous", "zoh"])
def test_static_rest_with_friction(schedule):
    tr = short_traj(scale=0.0)
    log = run_simulation(SimConfig(schedule=schedule, gains=SMALL if schedule == "zoh" else GainSet()), tr)
    np.testing.assert_array_equal(log.qp, 0.0)
    np.testing.assert_array_equal(log.tauf, 0.0)
    np.testing.assert_allclose(log.taup, 0.0, atol=1e-12)


def test_zoh_torque_audit(traj):
    cfg = SimConfig(schedule="zoh", gains=SMALL, friction_enabled=True)
    log = run_simulation(cfg, traj)
    pid = PidState(clamp=cfg.integral_clamp)
    dt = 1.0 / cfg.fast_hz
    for k in range(len(log.t)):
        tau_f = np.array([friction_torque(p, w) for p, w in zip(log.friction, log.vm[k])])
        corr = loop2_correction(pid, log.e[k], log.vm[k] - log.vp[k], dt, SMALL, tau_f)
        np.testing.assert_allclose(log.taup[k], log.taum[k] + corr, rtol=1e-12, atol=1e-9)


def test_zoh_counter_rates(traj):
    log = run_simulation(SimConfig(schedule="zoh", gains=SMALL), traj)
    rates = log.counter_rates()
    assert rates == {"M": 100.0, "G": 100.0, "V": 0.0, "ID": 0.0}
    ctc = run_simulation(SimConfig(schedule="zoh", gains=SMALL, scheme="ctc"), traj).counter_rates()
    assert ctc["M"] == ctc["V"] == 1000.0 and ctc["ID"] == 0.0


def test_ctc_logs_desired_trajectory_as_model(traj):
    log = run_simulation(SimConfig(scheme="ctc", friction_enabled=False), traj)
    np.testing.assert_array_equal(log.qm, log.qd)
    assert log.max_tracking_error_deg().max() < 0.01


def test_unstable_gains_refused(traj):
    bad = GainSet(loop1_Kp=-5.0)
    with pytest.raises(UnstableGainsError, match="Routh"):
        run_simulation(SimConfig(gains=bad), traj)


def test_divergence_keeps_partial_log(traj):
    # the default gains with a 1 kHz held torque are not discretely stable
    with pytest.raises(SimulationDiverged) as info:
        run_simulation(SimConfig(schedule="zoh"), traj)
    log = info.value.log
    assert log.diverged and 0 < len(log.t) < len(traj.times)
    assert info.value.t == pytest.approx(log.t[-1], abs=1.5e-3)
    assert set(log.counter_rates()) == {"M", "G", "V", "ID"}


def test_empty_log_has_no_rates(continuous_log):
    with pytest.raises(SimulationError):
        continuous_log.truncated(0).counter_rates()


@pytest.mark.parametrize("kw", [dict(scheme="pd"), dict(schedule="euler"), dict(fast_hz=1050),
                                dict(substeps=0), dict(friction=(None,) * 3)])
def test_invalid_sim_config(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_csv_and_metadata(continuous_log, tmp_path):
    path = continuous_log.write_csv(tmp_path / "run.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    expected = ["t"] + [f"{g}{j}" for g in ("qd", "qm", "qp", "taum", "taup", "tauf", "e")
                        for j in range(1, 8)]
    assert rows[0] == expected
    assert len(rows) == len(continuous_log.t) + 1
    np.testing.assert_allclose(np.array(rows[1:], dtype=float)[:, 1:8], continuous_log.qd, atol=1e-9)
    meta = json.loads(continuous_log.write_metadata(tmp_path / "m.json", {"a": 1}).read_text())
    assert meta["scheme"] == "rmrctc" and meta["config"] == {"a": 1}
    assert meta["ticks"] == len(continuous_log.t)
