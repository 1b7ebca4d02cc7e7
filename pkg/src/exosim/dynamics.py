"""Rigid-body dynamics of the leg chain.

Inverse dynamics is recursive Newton-Euler; mass matrix, Coriolis and
gravity vectors are extracted from it. :func:`energies` evaluates the
Lagrangian energies from the COM kinematics and is independent of the
recursive path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .kinematics import com_kinematics
from .model import N_JOINTS, RobotModel


class DynamicsError(ArithmeticError):
    """Linear solve produced non-finite accelerations (corrupted model)."""


def _vec(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (N_JOINTS,):
        raise ValueError(f"expected a {N_JOINTS}-vector, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class TorqueComponents:
    inertial: np.ndarray
    coriolis: np.ndarray
    gravitational: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.inertial + self.coriolis + self.gravitational


def inverse_dynamics(model: RobotModel, q, qdot, qddot) -> np.ndarray:
    return K.rnea(model.arrays(), _vec(q), _vec(qdot), _vec(qddot), 1.0)


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    return K.mass_matrix(model.arrays(), _vec(q))


def gravity_vector(model: RobotModel, q) -> np.ndarray:
    return K.gravity_torque(model.arrays(), _vec(q))


def coriolis_vector(model: RobotModel, q, qdot) -> np.ndarray:
    """V = ID(q, qdot, 0) - G(q), so the identity holds bit for bit."""
    arrs, q = model.arrays(), _vec(q)
    return K.rnea(arrs, q, _vec(qdot), np.zeros(N_JOINTS), 1.0) - K.gravity_torque(arrs, q)


def torque_components(model: RobotModel, q, qdot, qddot) -> TorqueComponents:
    return TorqueComponents(
        inertial=mass_matrix(model, q) @ _vec(qddot),
        coriolis=coriolis_vector(model, q, qdot),
        gravitational=gravity_vector(model, q),
    )


def energies(model: RobotModel, q, qdot) -> tuple[float, float]:
    """Kinetic and potential energy ``(k, u)`` from COM velocities.

    u = sum(-m g.p_c + u_ref) over the links.
    """
    ck = com_kinematics(q, qdot, model)
    k = 0.0
    u = 0.0
    for i in range(N_JOINTS):
        m = model.mass[i]
        v = ck.com_velocity[i]
        w = ck.angular_velocity[i]
        k += 0.5 * m * v @ v + 0.5 * w @ model.inertia[i] @ w
        u += -m * model.gravity @ ck.com_position[i] + model.u_ref
    return float(k), float(u)


def friction_array(friction) -> np.ndarray | None:
    """(4, 7) array of T_C, T_brk, w_brk, f, or None for a frictionless joint set."""
    if friction is None:
        return None
    if isinstance(friction, np.ndarray):
        return np.ascontiguousarray(friction, dtype=float)
    return np.array([[p.T_C, p.T_brk, p.omega_brk, p.f] for p in friction], dtype=float).T.copy()


_NO_FRICTION = np.zeros((4, N_JOINTS))
_NO_FRICTION[2] = 1.0


def forward_dynamics(model: RobotModel, q, qdot, tau, friction=None) -> np.ndarray:
    """Solve M qdd = tau - V - G - F(qdot) for qdd."""
    fr = friction_array(friction)
    use = fr is not None
    qdd, _M, ok = K.forward_dynamics(model.arrays(), _vec(q), _vec(qdot), _vec(tau),
                                     fr if use else _NO_FRICTION, use)
    if not ok or not np.all(np.isfinite(qdd)):
        raise DynamicsError("mass matrix is not positive definite or the solve is non-finite")
    return qdd
