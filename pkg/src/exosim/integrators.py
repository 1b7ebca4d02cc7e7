"""Fixed-step one-step methods for y' = f(t, y)."""

import math

import numpy as np

ROS2_GAMMA = 1.0 + 1.0 / math.sqrt(2.0)


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(f, t, y, dt, substeps=1):
    h = dt / substeps
    for i in range(substeps):
        y = rk4_step(f, t + i * h, y, h)
    return y


def ros2_step(f, jac, t, y, h):
    """Two-stage linearly implicit Rosenbrock step (L-stable, order 2).

    Order two holds for any approximation ``jac`` of the Jacobian, so only
    the stiff part needs to be supplied.
    """
    W = np.eye(len(y)) - ROS2_GAMMA * h * jac(t, y)
    k1 = np.linalg.solve(W, f(t, y))
    k2 = np.linalg.solve(W, f(t + h, y + h * k1) - 2 * k1)
    return y + 1.5 * h * k1 + 0.5 * h * k2
