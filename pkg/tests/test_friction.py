import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exosim import _kernels as K
from exosim.dynamics import friction_array
from exosim.friction import (
    FrictionError, FrictionParams, coulomb_component, friction_curve, friction_params_from_peak,
    friction_torque, joint_friction_from_peaks, stribeck_component, viscous_component,
)

FIG = FrictionParams(T_C=10.0, T_brk=15.0, omega_brk=0.01, f=5.0)

params = st.builds(
    lambda tc, extra, wb, f: FrictionParams(tc, tc + extra, wb, f),
    st.floats(0, 100), st.floats(0, 100), st.floats(1e-4, 1.0), st.floats(0, 10),
)


def argmax_refined(fn, lo, hi, rounds=6, n=2001):
    # grid search refined around the best point
    for _ in range(rounds):
        w = np.linspace(lo, hi, n)
        k = int(np.argmax(fn(w)))
        step = w[1] - w[0]
        lo, hi = max(w[k] - step, 0.0), w[k] + step
    return w[k]


def test_zero_velocity():
    assert friction_torque(FIG, 0.0) == 0.0


def test_peak_rule_reproduces_curve_parameters():
    p = friction_params_from_peak(100.0, 0.01, 5.0)
    assert (p.T_C, p.T_brk) == (10.0, 15.0)


def test_derived_thresholds():
    p = friction_params_from_peak(1.0, 0.01)
    assert p.omega_st == pytest.approx(0.014142, abs=5e-7)
    assert p.omega_coul == pytest.approx(0.001, rel=1e-15)


def test_stribeck_peak_at_breakaway_velocity():
    w_star = argmax_refined(lambda w: stribeck_component(FIG, w), 0.0, 1.0)
    assert w_star == pytest.approx(FIG.omega_brk, rel=1e-6)
    assert float(stribeck_component(FIG, FIG.omega_brk)) == pytest.approx(5.0, rel=1e-12)
    assert float(friction_torque(FIG, FIG.omega_brk)) == pytest.approx(15.05, abs=5e-3)


def test_high_speed_asymptote():
    T = float(friction_torque(FIG, 100.0))
    assert T == pytest.approx(510.0, abs=1e-9)
    assert abs(float(stribeck_component(FIG, 100.0))) < 1e-300


def test_zero_peak_is_pure_viscous():
    p = friction_params_from_peak(0.0, 0.01, 0.7)
    w = np.linspace(-3, 3, 31)
    np.testing.assert_allclose(friction_torque(p, w), 0.7 * w, rtol=0, atol=1e-15)


@pytest.mark.parametrize("kw", [dict(T_C=2, T_brk=1), dict(T_C=-1, T_brk=1), dict(omega_brk=0), dict(f=-0.1)])
def test_invalid_parameters(kw):
    base = dict(T_C=1.0, T_brk=2.0, omega_brk=0.01, f=0.1)
    base.update(kw)
    with pytest.raises(FrictionError):
        FrictionParams(**base)


def test_negative_peak_rejected():
    with pytest.raises(FrictionError):
        friction_params_from_peak(-1.0)


def test_joint_rule_uses_magnitudes():
    ps = joint_friction_from_peaks([-20.0, 0.0, 5.0])
    assert [p.T_C for p in ps] == [2.0, 0.0, 0.5]


def test_curve_grid():
    rows = friction_curve(FIG, 100.0, n=501)
    w = rows[:, 0]
    assert np.all(np.diff(w) > 0)
    assert 0.0 in w and FIG.omega_brk in w and -FIG.omega_brk in w
    assert w[0] == -100.0 and w[-1] == 100.0
    np.testing.assert_allclose(rows[:, 1], rows[:, 2] + rows[:, 3] + rows[:, 4], atol=1e-12)


def test_kernel_matches_reference_implementation(rng):
    ps = [FrictionParams(*sorted(rng.uniform(0, 20, 2)), rng.uniform(1e-3, 0.1), rng.uniform(0, 2))
          for _ in range(7)]
    w = rng.normal(size=7) * 0.05
    ref = np.array([float(friction_torque(p, x)) for p, x in zip(ps, w)])
    np.testing.assert_allclose(K.friction(friction_array(ps), w), ref, rtol=1e-13, atol=1e-13)


def test_kernel_slope_matches_difference_quotient(rng):
    ps = [FrictionParams(3.0, 4.5, 0.01, 0.1)] * 7
    fr = friction_array(ps)
    w = rng.normal(size=7) * 0.02
    h = 1e-8
    fd = (K.friction(fr, w + h) - K.friction(fr, w - h)) / (2 * h)
    np.testing.assert_allclose(K.friction_slope(fr, w), fd, rtol=1e-5)


@given(params, st.floats(-1e3, 1e3))
def test_odd_symmetry(p, w):
    assert friction_torque(p, -w) == -friction_torque(p, w)


@given(params, st.floats(1e-6, 1e3))
def test_sign_follows_velocity(p, w):
    if p.T_C > 0 or p.f > 0:
        assert friction_torque(p, w) > 0
        assert friction_torque(p, -w) < 0


# Stribeck residual at 10 omega_brk is ~3e-21 (T_brk - T_C), so the bound
# needs a breakaway/Coulomb ratio far below 1e18; the peak rule gives 1.5
bounded_params = st.builds(
    lambda tc, r, wb, f: FrictionParams(tc, tc * r, wb, f),
    st.floats(1e-6, 100), st.floats(1.0, 1e3), st.floats(1e-4, 1.0), st.floats(0, 10),
)


@given(bounded_params, st.floats(10.0, 1e4))
def test_asymptote_above_ten_breakaway(p, ratio):
    w = ratio * p.omega_brk
    if p.T_C > 0:
        assert abs(float(friction_torque(p, w)) - (p.T_C + p.f * w)) < 0.01 * p.T_C


@given(params)
def test_stribeck_maximum_is_the_difference(p):
    if p.T_brk > p.T_C:
        w = np.linspace(0, 5 * p.omega_brk, 20001)
        assert np.max(stribeck_component(p, w)) <= (p.T_brk - p.T_C) * (1 + 1e-12)
        assert float(stribeck_component(p, p.omega_brk)) == pytest.approx(p.T_brk - p.T_C, rel=1e-9)


@given(params, st.floats(-10, 10))
def test_components_sum(p, w):
    total = stribeck_component(p, w) + coulomb_component(p, w) + viscous_component(p, w)
    assert math.isclose(float(friction_torque(p, w)), float(total), rel_tol=1e-15, abs_tol=1e-300)
