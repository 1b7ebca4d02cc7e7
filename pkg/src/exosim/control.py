"""Torque laws and gain stability checks.

The model loop is computed-torque control; the correction loop is a PID on
the model-to-plant error plus an optional friction feed-forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import coriolis_vector, gravity_vector, mass_matrix
from .model import N_JOINTS, RobotModel

DEFAULT_INTEGRAL_CLAMP = 10.0


def _gain(v) -> np.ndarray:
    a = np.broadcast_to(np.asarray(v, dtype=float), (N_JOINTS,)).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GainSet:
    loop1_Kp: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 500.0))
    loop1_Kv: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 7500.0))
    loop2_KP: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 1e4))
    loop2_KI: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 250.0))
    loop2_KV: np.ndarray = field(
        default_factory=lambda: np.array([55e3, 50e3, 55e2, 3e2, 55e2, 55e2, 55e2]))

    def __post_init__(self):
        for name in ("loop1_Kp", "loop1_Kv", "loop2_KP", "loop2_KI", "loop2_KV"):
            g = _gain(getattr(self, name))
            if not np.all(np.isfinite(g)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, g)

    def __eq__(self, other):
        if not isinstance(other, GainSet):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n))
                   for n in ("loop1_Kp", "loop1_Kv", "loop2_KP", "loop2_KI", "loop2_KV"))

    def as_array(self) -> np.ndarray:
        return np.array([self.loop1_Kp, self.loop1_Kv, self.loop2_KP, self.loop2_KI, self.loop2_KV])

    def scaled(self, c: float) -> "GainSet":
        return GainSet(*(c * g for g in self.as_array()))


@dataclass(frozen=True)
class RefPoint:
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray


def routh_first_column(coeffs) -> np.ndarray:
    """First column of the Routh array of a polynomial (highest power first)."""
    c = [float(x) for x in coeffs]
    n = len(c)
    rows = [c[0::2], c[1::2]]
    width = len(rows[0])
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    while len(rows) < n:
        a, b = rows[-2], rows[-1]
        if b[0] == 0.0:
            rows.append([0.0] * width)
            break
        new = [(b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0] for j in range(width - 1)] + [0.0]
        rows.append(new)
    return np.array([r[0] for r in rows[:n]])


def _hurwitz(coeffs) -> bool:
    col = routh_first_column(coeffs)
    return bool(np.all(col > 0))


@dataclass(frozen=True)
class StabilityVerdict:
    loop1: tuple[bool, ...]
    loop2: tuple[bool, ...]

    @property
    def stable(self) -> bool:
        return all(self.loop1) and all(self.loop2)

    def describe(self) -> str:
        bad = [f"loop 1 joint {i + 1}" for i, ok in enumerate(self.loop1) if not ok]
        bad += [f"loop 2 joint {i + 1}" for i, ok in enumerate(self.loop2) if not ok]
        if not bad:
            return "all loops asymptotically stable"
        return "Routh-Hurwitz check failed (gains must be positive) for " + ", ".join(bad)


def routh_hurwitz_stable(gains: GainSet) -> StabilityVerdict:
    """Per-joint verdicts for s^2 + Kv s + Kp and KV s^2 + KP s + KI."""
    loop1 = tuple(_hurwitz([1.0, kv, kp]) for kp, kv in zip(gains.loop1_Kp, gains.loop1_Kv))
    loop2 = tuple(_hurwitz([KV, KP, KI])
                  for KP, KI, KV in zip(gains.loop2_KP, gains.loop2_KI, gains.loop2_KV))
    return StabilityVerdict(loop1, loop2)


def ctc_torque(model: RobotModel, q, qdot, ref: RefPoint, gains: GainSet,
               include_coriolis: bool = True) -> np.ndarray:
    """Computed torque M(q)[qdd_d + Kv e_dot + Kp e] + G(q) (+ V(q, qdot))."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    a = ref.qddot + gains.loop1_Kv * (ref.qdot - qdot) + gains.loop1_Kp * (ref.q - q)
    tau = mass_matrix(model, q) @ a + gravity_vector(model, q)
    if include_coriolis:
        tau = tau + coriolis_vector(model, q, qdot)
    return tau


@dataclass
class PidState:
    """Integral of the model-to-plant error with a symmetric clamp."""

    clamp: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, DEFAULT_INTEGRAL_CLAMP))
    integral: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    last_error: np.ndarray | None = None

    def __post_init__(self):
        self.clamp = np.broadcast_to(np.asarray(self.clamp, dtype=float), (N_JOINTS,)).copy()
        if np.any(self.clamp <= 0):
            raise ValueError("integral clamp must be positive")

    def accumulate(self, E, dt: float) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        if self.last_error is not None:
            self.integral = self.integral + 0.5 * dt * (self.last_error + E)
        self.integral = np.clip(self.integral, -self.clamp, self.clamp)
        self.last_error = E.copy()
        return self.integral


def loop2_correction(state: PidState, E, Edot, dt: float, gains: GainSet, tau_f=None) -> np.ndarray:
    """Correction torque KI*int(E) + KP*E + KV*Edot + tau_f.

    Updates the trapezoidal integral held in ``state``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    integral = state.accumulate(E, dt)
    out = gains.loop2_KI * integral + gains.loop2_KP * np.asarray(E) + gains.loop2_KV * np.asarray(Edot)
    if tau_f is not None:
        out = out + tau_f
    return out
