import numpy as np
import pytest
from hypothesis import given, strategies as st

from exosim.trajectory import (
    DEFAULT_AMPLITUDES_DEG, RANGE_OF_MOTION_DEG, TrajectoryError, TrajectorySpec, check_rom,
    generate_trajectory, rom_span_deg,
)


def _deg(*a):
    return tuple(np.radians(a))


def test_default_amplitudes_span_half_the_range():
    for j, a in enumerate(DEFAULT_AMPLITUDES_DEG):
        assert abs(a) >= 0.5 * rom_span_deg(j)


def test_range_of_motion_limits():
    assert RANGE_OF_MOTION_DEG["hip_flexion"] == (120.0, 30.0)
    assert RANGE_OF_MOTION_DEG["hip_abduction"] == (45.0, 30.0)
    assert RANGE_OF_MOTION_DEG["knee_flexion"][0] == 135.0
    assert RANGE_OF_MOTION_DEG["ankle_flexion"] == (20.0, 50.0)
    assert RANGE_OF_MOTION_DEG["ankle_inversion"] == (35.0, 15.0)


def test_hip_flexion_beyond_limit_rejected():
    with pytest.raises(TrajectoryError, match=r"joint 2 \(hip_flexion\).*120"):
        TrajectorySpec(amplitudes=_deg(0, 125, 0, 0, 0, 0, 0))


def test_negative_limit_rejected():
    with pytest.raises(TrajectoryError, match="ankle_inversion"):
        check_rom(_deg(0, 0, 0, 0, 0, 0, -16))


@pytest.mark.parametrize("kw", [dict(mode="diagonal"), dict(motion_time=0.0), dict(dwell=-1.0),
                                dict(total_duration=1.0)])
def test_invalid_specs(kw):
    with pytest.raises(TrajectoryError):
        generate_trajectory(TrajectorySpec(**kw))


@pytest.mark.parametrize("mode, duration", [("sequential", 28.0), ("simultaneous", 4.0)])
def test_default_durations(mode, duration):
    tr = generate_trajectory(TrajectorySpec(mode=mode))
    assert tr.duration == pytest.approx(duration)
    assert tr.times[-1] == pytest.approx(duration)
    assert tr.q.shape == (len(tr.times), 7)


def test_boundary_conditions():
    spec = TrajectorySpec(mode="sequential")
    tr = generate_trajectory(spec)
    prof = tr.profile
    for j in range(7):
        for k in range(prof.nseg[j]):
            for t in (prof.start[j, k], prof.start[j, k] + prof.dur[j, k]):
                _, v, a = prof(t)
                assert abs(v[j]) < 1e-12 and abs(a[j]) < 1e-12
    np.testing.assert_allclose(tr.q[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(tr.q[-1], 0.0, atol=1e-12)


@given(st.floats(0.0, 1.0), st.floats(0.2, 5.0))
def test_peak_velocity_at_midpoint(frac, T):
    amp = frac * np.radians(DEFAULT_AMPLITUDES_DEG)
    spec = TrajectorySpec(mode="simultaneous", amplitudes=tuple(amp), motion_time=T, dwell=0.1)
    prof = generate_trajectory(spec, sample_rate=50).profile
    _, v, a = prof(T / 2)
    np.testing.assert_allclose(v, 1.875 * amp / T, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(a, 0.0, atol=1e-9 * np.abs(amp).max() / T**2 + 1e-15)


def test_derivatives_are_analytic():
    tr = generate_trajectory(TrajectorySpec(mode="simultaneous"), sample_rate=1000)
    h = 1e-6
    for t in (0.3, 0.75, 1.2, 2.4, 3.1):
        qp, vp, _ = tr.profile(t + h)
        qm, vm, _ = tr.profile(t - h)
        _, v, a = tr.profile(t)
        np.testing.assert_allclose((qp - qm) / (2 * h), v, atol=1e-7)
        np.testing.assert_allclose((vp - vm) / (2 * h), a, atol=1e-5)


def test_sequential_moves_one_joint_at_a_time():
    tr = generate_trajectory(TrajectorySpec(mode="sequential"), sample_rate=200)
    moving = np.abs(tr.qdot) > 1e-12
    assert np.all(moving.sum(axis=1) <= 1)
    assert np.all(moving.any(axis=0))


def test_sampled_rows_match_profile():
    tr = generate_trajectory(TrajectorySpec(mode="simultaneous"), sample_rate=100)
    for i in (0, 57, 250, len(tr.times) - 1):
        q, v, a = tr.profile(tr.times[i])
        np.testing.assert_array_equal(q, tr.q[i])
        np.testing.assert_array_equal(v, tr.qdot[i])
        np.testing.assert_array_equal(a, tr.qddot[i])
