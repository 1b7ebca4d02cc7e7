"""Compiled numeric core.

Everything here works on plain arrays so numba can compile it. Model
arguments are the tuple returned by ``RobotModel.arrays()``:
``(dh, mass, com, inertia, gravity)``.
"""

import math

import numpy as np
from numba import njit

N = 7
SQRT_2E = math.sqrt(2.0 * math.e)
GAMMA = 1.0 + 1.0 / math.sqrt(2.0)

SCHEME_CTC, SCHEME_MRCTC, SCHEME_RMRCTC = 0, 1, 2


@njit(cache=True)
def _dh(theta, d, a, alpha, R, p):
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    R[0, 0] = ct
    R[0, 1] = -st
    R[0, 2] = 0.0
    R[1, 0] = st * ca
    R[1, 1] = ct * ca
    R[1, 2] = -sa
    R[2, 0] = st * sa
    R[2, 1] = ct * sa
    R[2, 2] = ca
    p[0] = a
    p[1] = -sa * d
    p[2] = ca * d


@njit(cache=True)
def _cross(a, b, out):
    x = a[1] * b[2] - a[2] * b[1]
    y = a[2] * b[0] - a[0] * b[2]
    z = a[0] * b[1] - a[1] * b[0]
    out[0] = x
    out[1] = y
    out[2] = z


@njit(cache=True)
def _rt_mul(R, v, out):
    for i in range(3):
        out[i] = R[0, i] * v[0] + R[1, i] * v[1] + R[2, i] * v[2]


@njit(cache=True)
def _r_mul(R, v, out):
    for i in range(3):
        out[i] = R[i, 0] * v[0] + R[i, 1] * v[1] + R[i, 2] * v[2]


@njit(cache=True)
def rnea(model, q, qd, qdd, gscale):
    """Recursive Newton-Euler inverse dynamics (modified DH, revolute joints).

    ``gscale`` multiplies the gravity vector; 0 gives the gravity-free torque.
    """
    dh, mass, com, inertia, gravity = model
    Rs = np.empty((N, 3, 3))
    ps = np.empty((N, 3))
    F = np.empty((N, 3))
    Nm = np.empty((N, 3))

    w = np.zeros(3)
    wd = np.zeros(3)
    vd = np.empty(3)
    for k in range(3):
        vd[k] = -gscale * gravity[k]

    t1 = np.empty(3)
    t2 = np.empty(3)
    t3 = np.empty(3)
    w_new = np.empty(3)
    wd_new = np.empty(3)
    vc = np.empty(3)
    Iw = np.empty(3)

    for i in range(N):
        R = Rs[i]
        p = ps[i]
        _dh(q[i] + dh[i, 0], dh[i, 1], dh[i, 2], dh[i, 3], R, p)

        # linear acceleration of frame origin, in frame i
        _cross(wd, p, t1)
        _cross(w, p, t2)
        _cross(w, t2, t3)
        for k in range(3):
            t1[k] += t3[k] + vd[k]
        _rt_mul(R, t1, vd)

        _rt_mul(R, w, w_new)
        _rt_mul(R, wd, wd_new)
        # (R^T w) x (qd_i z)
        wd_new[0] += w_new[1] * qd[i]
        wd_new[1] -= w_new[0] * qd[i]
        wd_new[2] += qdd[i]
        w_new[2] += qd[i]
        for k in range(3):
            w[k] = w_new[k]
            wd[k] = wd_new[k]

        c = com[i]
        _cross(wd, c, t1)
        _cross(w, c, t2)
        _cross(w, t2, t3)
        for k in range(3):
            vc[k] = t1[k] + t3[k] + vd[k]
            F[i, k] = mass[i] * vc[k]
        I = inertia[i]
        _r_mul(I, wd, t1)
        _r_mul(I, w, Iw)
        _cross(w, Iw, t2)
        for k in range(3):
            Nm[i, k] = t1[k] + t2[k]

    tau = np.empty(N)
    f = np.zeros(3)
    n = np.zeros(3)
    fr = np.empty(3)
    nr = np.empty(3)
    for i in range(N - 1, -1, -1):
        if i < N - 1:
            _r_mul(Rs[i + 1], f, fr)
            _r_mul(Rs[i + 1], n, nr)
            _cross(ps[i + 1], fr, t1)
        else:
            for k in range(3):
                fr[k] = 0.0
                nr[k] = 0.0
                t1[k] = 0.0
        _cross(com[i], F[i], t2)
        for k in range(3):
            n[k] = Nm[i, k] + nr[k] + t2[k] + t1[k]
            f[k] = fr[k] + F[i, k]
        tau[i] = n[2]
    return tau


@njit(cache=True)
def gravity_torque(model, q):
    z = np.zeros(N)
    return rnea(model, q, z, z, 1.0)


@njit(cache=True)
def coriolis_torque(model, q, qd):
    return rnea(model, q, qd, np.zeros(N), 0.0)


@njit(cache=True)
def mass_matrix(model, q):
    """Column j is the gravity-free torque for unit acceleration of joint j."""
    M = np.empty((N, N))
    z = np.zeros(N)
    e = np.zeros(N)
    for j in range(N):
        e[j] = 1.0
        col = rnea(model, q, z, e, 0.0)
        e[j] = 0.0
        for i in range(N):
            M[i, j] = col[i]
    # rounding-level asymmetry only
    for i in range(N):
        for j in range(i + 1, N):
            s = 0.5 * (M[i, j] + M[j, i])
            M[i, j] = s
            M[j, i] = s
    return M


@njit(cache=True)
def cholesky(A):
    """Lower Cholesky factor; ``ok`` is False when a pivot falls below a
    relative rounding floor (numerically singular or indefinite)."""
    n = A.shape[0]
    L = np.zeros_like(A)
    floor = 0.0
    for j in range(n):
        floor = max(floor, abs(A[j, j]))
    floor *= 1e-12
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > floor:
            return L, False
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True)
def cho_solve(L, b):
    n = L.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def spd_inverse(M):
    L, ok = cholesky(M)
    n = M.shape[0]
    inv = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        col = cho_solve(L, e)
        e[j] = 0.0
        for i in range(n):
            inv[i, j] = col[i]
    return inv


@njit(cache=True)
def friction(fric, w):
    """Stribeck + Coulomb + viscous torque; ``fric`` rows are T_C, T_brk, w_brk, f."""
    n = w.shape[0]
    out = np.empty(n)
    for i in range(n):
        tc, tb, wb, f = fric[0, i], fric[1, i], fric[2, i], fric[3, i]
        wst = wb * math.sqrt(2.0)
        wc = wb / 10.0
        x = w[i] / wst
        out[i] = SQRT_2E * (tb - tc) * math.exp(-x * x) * x + tc * math.tanh(w[i] / wc) + f * w[i]
    return out


@njit(cache=True)
def friction_slope(fric, w):
    n = w.shape[0]
    out = np.empty(n)
    for i in range(n):
        tc, tb, wb, f = fric[0, i], fric[1, i], fric[2, i], fric[3, i]
        wst = wb * math.sqrt(2.0)
        wc = wb / 10.0
        x = w[i] / wst
        th = math.tanh(w[i] / wc)
        out[i] = SQRT_2E * (tb - tc) / wst * math.exp(-x * x) * (1.0 - 2.0 * x * x) \
            + tc / wc * (1.0 - th * th) + f
    return out


@njit(cache=True)
def forward_dynamics(model, q, qd, tau, fric, use_friction):
    """Joint accelerations and the mass matrix. ``ok`` is False when M is not
    numerically positive definite."""
    M = mass_matrix(model, q)
    rhs = tau - rnea(model, q, qd, np.zeros(N), 1.0)
    if use_friction:
        rhs = rhs - friction(fric, qd)
    L, ok = cholesky(M)
    if not ok:
        return np.full(N, np.nan), M, False
    return cho_solve(L, rhs), M, True


@njit(cache=True)
def rk4_held_torque(model, q, qd, tau, fric, use_friction, dt, substeps):
    """Classical RK4 over ``substeps`` equal steps with the torque held."""
    h = dt / substeps
    q = q.copy()
    qd = qd.copy()
    for _ in range(substeps):
        a1, _M, ok1 = forward_dynamics(model, q, qd, tau, fric, use_friction)
        q2 = q + 0.5 * h * qd
        v2 = qd + 0.5 * h * a1
        a2, _M, ok2 = forward_dynamics(model, q2, v2, tau, fric, use_friction)
        q3 = q + 0.5 * h * v2
        v3 = qd + 0.5 * h * a2
        a3, _M, ok3 = forward_dynamics(model, q3, v3, tau, fric, use_friction)
        q4 = q + h * v3
        v4 = qd + h * a3
        a4, _M, ok4 = forward_dynamics(model, q4, v4, tau, fric, use_friction)
        q = q + h / 6.0 * (qd + 2.0 * v2 + 2.0 * v3 + v4)
        qd = qd + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not (ok1 and ok2 and ok3 and ok4):
            return q, qd, False
        for i in range(N):
            if not (math.isfinite(q[i]) and math.isfinite(qd[i])):
                return q, qd, False
    return q, qd, True


@njit(cache=True)
def minjerk_eval(traj, t):
    """Piecewise quintic joint profiles.

    ``traj = (base, start, dur, q0, dq, nseg)``; segments of a joint are in
    time order and chain end-to-start.
    """
    base, start, dur, q0, dq, nseg = traj
    n = base.shape[0]
    pos = base.copy()
    vel = np.zeros(n)
    acc = np.zeros(n)
    for j in range(n):
        for k in range(nseg[j]):
            t0 = start[j, k]
            T = dur[j, k]
            if t >= t0 + T:
                pos[j] = q0[j, k] + dq[j, k]
            elif t > t0:
                s = (t - t0) / T
                s2 = s * s
                s3 = s2 * s
                pos[j] = q0[j, k] + dq[j, k] * s3 * (10.0 - 15.0 * s + 6.0 * s2)
                vel[j] = dq[j, k] / T * 30.0 * s2 * (1.0 - s) * (1.0 - s)
                acc[j] = dq[j, k] / (T * T) * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
                break
            else:
                break
    return pos, vel, acc


# closed-loop state layout: q_model, v_model, q_plant, v_plant, integral
NS = 5 * N


@njit(cache=True)
def closed_loop_rhs(ref, plant, gains, fric, flags, traj, t, y):
    """Time derivative of the closed-loop state.

    ``gains`` rows: Kp, Kv (model loop), KP, KI, KV (correction loop).
    ``flags``: scheme, plant friction on/off, friction feed-forward on/off.
    Returns ``(ydot, aux, M_plant, M_ref, ok)`` with ``aux`` rows tau_model,
    tau_plant, tau_friction.
    """
    scheme, use_fric, feedforward = flags[0], flags[1] != 0, flags[2] != 0
    kp, kv = gains[0], gains[1]
    KP, KI, KV = gains[2], gains[3], gains[4]
    qd_, vd_, ad_ = minjerk_eval(traj, t)
    qM = y[0:N]
    vM = y[N:2 * N]
    qP = y[2 * N:3 * N]
    vP = y[3 * N:4 * N]
    z = y[4 * N:5 * N]
    ydot = np.zeros(NS)
    aux = np.zeros((3, N))

    if scheme == SCHEME_CTC:
        Mr = mass_matrix(ref, qP)
        a_cmd = ad_ + kv * (vd_ - vP) + kp * (qd_ - qP)
        tau = Mr @ a_cmd + gravity_torque(ref, qP) + coriolis_torque(ref, qP, vP)
        aP, Mp, ok = forward_dynamics(plant, qP, vP, tau, fric, use_fric)
        ydot[2 * N:3 * N] = vP
        ydot[3 * N:4 * N] = aP
        aux[0] = tau
        aux[1] = tau
    else:
        Mr = mass_matrix(ref, qM)
        Gr = gravity_torque(ref, qM)
        a_cmd = ad_ + kv * (vd_ - vM) + kp * (qd_ - qM)
        if scheme == SCHEME_MRCTC:
            tau_m = Mr @ a_cmd + Gr + coriolis_torque(ref, qM, vM)
            aM, _M, okm = forward_dynamics(ref, qM, vM, tau_m, fric, False)
        else:
            tau_m = Mr @ a_cmd + Gr
            L, okm = cholesky(Mr)
            aM = cho_solve(L, tau_m - Gr)
        E = qM - qP
        Ed = vM - vP
        tau_p = tau_m + KI * z + KP * E + KV * Ed
        if feedforward:
            tau_p = tau_p + friction(fric, vM)
        aP, Mp, ok = forward_dynamics(plant, qP, vP, tau_p, fric, use_fric)
        ok = ok and okm
        ydot[0:N] = vM
        ydot[N:2 * N] = aM
        ydot[2 * N:3 * N] = vP
        ydot[3 * N:4 * N] = aP
        ydot[4 * N:5 * N] = E
        aux[0] = tau_m
        aux[1] = tau_p
    if use_fric:
        aux[2] = friction(fric, vP)
    return ydot, aux, Mp, Mr, ok


@njit(cache=True)
def closed_loop_jacobian(gains, fric, flags, y, Mp, Mr):
    """Stiff part of the closed-loop Jacobian (linear feedback and friction
    slopes, configuration dependence of M frozen)."""
    scheme, use_fric, feedforward = flags[0], flags[1] != 0, flags[2] != 0
    kp, kv = gains[0], gains[1]
    KP, KI, KV = gains[2], gains[3], gains[4]
    vM = y[N:2 * N]
    vP = y[3 * N:4 * N]
    Ap = spd_inverse(Mp)
    J = np.zeros((NS, NS))
    dP = np.zeros(N)
    if use_fric:
        dP = friction_slope(fric, vP)
    for i in range(N):
        J[2 * N + i, 3 * N + i] = 1.0
    if scheme == SCHEME_CTC:
        B = Ap @ Mr
        for i in range(N):
            for j in range(N):
                J[3 * N + i, 2 * N + j] = -B[i, j] * kp[j]
                J[3 * N + i, 3 * N + j] = -B[i, j] * kv[j] - Ap[i, j] * dP[j]
        return J
    dM = np.zeros(N)
    if feedforward:
        dM = friction_slope(fric, vM)
    B = Ap @ Mr
    for i in range(N):
        J[i, N + i] = 1.0
        J[N + i, i] = -kp[i]
        J[N + i, N + i] = -kv[i]
        J[4 * N + i, i] = 1.0
        J[4 * N + i, 2 * N + i] = -1.0
        for j in range(N):
            J[3 * N + i, j] = -B[i, j] * kp[j] + Ap[i, j] * KP[j]
            J[3 * N + i, N + j] = -B[i, j] * kv[j] + Ap[i, j] * (KV[j] + dM[j])
            J[3 * N + i, 2 * N + j] = -Ap[i, j] * KP[j]
            J[3 * N + i, 3 * N + j] = -Ap[i, j] * (KV[j] + dP[j])
            J[3 * N + i, 4 * N + j] = Ap[i, j] * KI[j]
    return J


@njit(cache=True)
def _state_ok(y, qmax):
    for i in range(y.shape[0]):
        if not math.isfinite(y[i]):
            return False
    for i in range(2 * N, 3 * N):
        if abs(y[i]) > qmax:
            return False
    for i in range(0, N):
        if abs(y[i]) > qmax:
            return False
    return True


@njit(cache=True)
def closed_loop_advance(ref, plant, gains, fric, flags, traj, t, y, f0, Mp0, Mr0,
                        h, substeps, clamp, qmax):
    """Advance ``substeps`` linearly implicit ROS2 steps from ``t``.

    ``f0, Mp0, Mr0`` are the derivative and mass matrices already evaluated
    at ``(t, y)``. Returns ``(y, n_rhs, ok)``.
    """
    y = y.copy()
    I = np.eye(NS)
    n_rhs = 0
    f = f0
    Mp = Mp0
    Mr = Mr0
    for s in range(substeps):
        ts = t + s * h
        if s > 0:
            f, _aux, Mp, Mr, ok = closed_loop_rhs(ref, plant, gains, fric, flags, traj, ts, y)
            n_rhs += 1
            if not ok:
                return y, n_rhs, False
        J = closed_loop_jacobian(gains, fric, flags, y, Mp, Mr)
        W = I - GAMMA * h * J
        k1 = np.linalg.solve(W, f)
        f2, _aux, _Mp, _Mr, ok = closed_loop_rhs(ref, plant, gains, fric, flags, traj, ts + h, y + h * k1)
        n_rhs += 1
        if not ok:
            return y, n_rhs, False
        k2 = np.linalg.solve(W, f2 - 2.0 * k1)
        y = y + 1.5 * h * k1 + 0.5 * h * k2
        if flags[0] != SCHEME_CTC:
            for i in range(4 * N, 5 * N):
                if y[i] > clamp[i - 4 * N]:
                    y[i] = clamp[i - 4 * N]
                elif y[i] < -clamp[i - 4 * N]:
                    y[i] = -clamp[i - 4 * N]
        if not _state_ok(y, qmax):
            return y, n_rhs, False
    return y, n_rhs, True
