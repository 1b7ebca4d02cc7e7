"""Joint friction: Stribeck bump, smoothed Coulomb step and viscous drag."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT_2E = math.sqrt(2.0 * math.e)

# fractions of the peak joint torque
COULOMB_FRACTION = 0.1
BREAKAWAY_FRACTION = 0.15

DEFAULT_OMEGA_BRK = 0.01
DEFAULT_VISCOUS = 0.1


class FrictionError(ValueError):
    pass


@dataclass(frozen=True)
class FrictionParams:
    T_C: float
    T_brk: float
    omega_brk: float
    f: float
    omega_st: float = field(init=False)
    omega_coul: float = field(init=False)

    def __post_init__(self):
        if not (self.T_brk >= self.T_C >= 0):
            raise FrictionError(f"need T_brk >= T_C >= 0, got T_C={self.T_C}, T_brk={self.T_brk}")
        if not self.omega_brk > 0:
            raise FrictionError(f"breakaway velocity must be positive, got {self.omega_brk}")
        if not self.f >= 0:
            raise FrictionError(f"viscous coefficient must be non-negative, got {self.f}")
        object.__setattr__(self, "omega_st", self.omega_brk * math.sqrt(2.0))
        object.__setattr__(self, "omega_coul", self.omega_brk / 10.0)


def stribeck_component(p: FrictionParams, omega):
    x = np.asarray(omega, dtype=float) / p.omega_st
    return SQRT_2E * (p.T_brk - p.T_C) * np.exp(-x * x) * x


def coulomb_component(p: FrictionParams, omega):
    return p.T_C * np.tanh(np.asarray(omega, dtype=float) / p.omega_coul)


def viscous_component(p: FrictionParams, omega):
    return p.f * np.asarray(omega, dtype=float)


def friction_torque(p: FrictionParams, omega):
    """Friction torque at angular velocity ``omega`` (scalar or array)."""
    return stribeck_component(p, omega) + coulomb_component(p, omega) + viscous_component(p, omega)


def friction_params_from_peak(tau_peak: float, omega_brk: float = DEFAULT_OMEGA_BRK,
                              f: float = DEFAULT_VISCOUS) -> FrictionParams:
    if not tau_peak >= 0:
        raise FrictionError(f"peak torque must be non-negative, got {tau_peak}")
    return FrictionParams(T_C=COULOMB_FRACTION * tau_peak, T_brk=BREAKAWAY_FRACTION * tau_peak,
                          omega_brk=omega_brk, f=f)


def joint_friction_from_peaks(tau_peaks, omega_brk=DEFAULT_OMEGA_BRK, f=DEFAULT_VISCOUS):
    """One parameter set per joint from per-joint peak torques."""
    return tuple(friction_params_from_peak(float(t), omega_brk, f) for t in np.abs(tau_peaks))


def friction_curve(p: FrictionParams, omega_max: float, n: int = 2001) -> np.ndarray:
    """Rows of (omega, total, stribeck, coulomb, viscous) over [-omega_max, omega_max].

    The grid is symmetric, contains zero and +-omega_brk exactly, and is
    log-spaced so the low-velocity region is resolved.
    """
    if omega_max <= 0:
        raise FrictionError("omega_max must be positive")
    lo = min(p.omega_brk, omega_max) * 1e-3
    pos = np.geomspace(lo, omega_max, max(n // 2, 2))
    pos = np.union1d(pos, [p.omega_brk] if p.omega_brk <= omega_max else [])
    w = np.concatenate([-pos[::-1], [0.0], pos])
    return np.column_stack([w, friction_torque(p, w), stribeck_component(p, w),
                            coulomb_component(p, w), viscous_component(p, w)])
