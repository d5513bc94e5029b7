# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Mirrors ``seirctl._core_py`` operation for operation, in the same
arithmetic order, so the two backends produce matching trajectories.

Parameter vector layout (10 entries):
    alpha, beta, gamma, delta, lambda1, lambda2, lambda3, kappa1, kappa2, kappa3
Weight vector layout (3 entries): w1, w2, w3.
"""

import numpy as np

from libc.math cimport exp, isfinite

from .errors import NonFiniteStateError

COMPILED = True

EXP_CLAMP = 700.0

ADJOINT_PRINTED = 0
ADJOINT_CONSTANT_N = 1

cdef double _EXP_CLAMP_C = 700.0


cdef inline double _cexp(double a) nogil:
    if a > _EXP_CLAMP_C:
        a = _EXP_CLAMP_C
    elif a < -_EXP_CLAMP_C:
        a = -_EXP_CLAMP_C
    return exp(a)


cdef inline double _recovery(double t, double lam1, double lam2, double lam3) nogil:
    return lam1 / (1.0 + _cexp(-lam2 * (t - lam3)))


cdef inline double _mortality(double t, double kap1, double kap2, double kap3) nogil:
    cdef double a = kap2 * (t - kap3)
    return kap1 / (_cexp(a) + _cexp(-a))


def recovery_rate(double t, double lam1, double lam2, double lam3):
    """Logistic-in-time recovery rate lam1 / (1 + exp(-lam2*(t - lam3)))."""
    return _recovery(t, lam1, lam2, lam3)


def mortality_rate(double t, double kap1, double kap2, double kap3):
    """Bell-shaped mortality rate kap1 / (exp(a) + exp(-a)), a = kap2*(t - kap3)."""
    return _mortality(t, kap1, kap2, kap3)


cdef inline void _rhs_c(double t, double* x, double u1, double u2, double u3,
                        double* p, double n_pop, double* out) nogil:
    cdef double lam = _recovery(t, p[4], p[5], p[6])
    cdef double kap = _mortality(t, p[7], p[8], p[9])
    cdef double infect = p[1] * u1 * x[0] * x[2] / n_pop
    cdef double protect = (p[0] + u2) * x[0]
    cdef double latent = p[2] * x[1]
    cdef double quarantine = p[3] * x[2]
    cdef double recover = (lam + u3) * x[3]
    cdef double die = kap * x[3]
    out[0] = -infect - protect
    out[1] = infect - latent
    out[2] = latent - quarantine
    out[3] = quarantine - recover - die
    out[4] = recover
    out[5] = die
    out[6] = protect


def rhs_controlled(t, x, u, params, n_pop):
    """Single controlled-RHS evaluation; returns a 7-tuple of derivatives."""
    cdef double[7] xv
    cdef double[10] pv
    cdef double[7] out
    cdef int j
    for j in range(7):
        xv[j] = float(x[j])
    for j in range(10):
        pv[j] = float(params[j])
    _rhs_c(float(t), xv, float(u[0]), float(u[1]), float(u[2]), pv,
           float(n_pop), out)
    return (out[0], out[1], out[2], out[3], out[4], out[5], out[6])


cdef inline int _finite7(double* x) nogil:
    cdef int j
    for j in range(7):
        if not isfinite(x[j]):
            return 0
    return 1


def sim_forward(x0, t0, double h, int n_steps, params, n_pop, u_nodes):
    """Classical RK4 sweep of the controlled model over a fixed grid.

    ``u_nodes`` holds one (u1, u2, u3) triple per node; values at the RK4
    half-step come from linear interpolation between adjacent nodes, which
    keeps every queried control inside its admissible box.

    Returns (states, derivs), both shaped (n_steps + 1, 7); derivs[i] is the
    controlled RHS evaluated at node i (used for dense cubic interpolation).
    """
    cdef double t_start = float(t0)
    cdef double npop = float(n_pop)
    cdef double[10] p
    cdef int j
    for j in range(10):
        p[j] = float(params[j])
    u_arr = np.ascontiguousarray(u_nodes, dtype=np.float64)
    cdef double[:, ::1] u = u_arr
    states_arr = np.empty((n_steps + 1, 7))
    derivs_arr = np.empty((n_steps + 1, 7))
    cdef double[:, ::1] states = states_arr
    cdef double[:, ::1] derivs = derivs_arr

    cdef double[7] x, x1, x2, x3, k1, k2, k3, k4
    cdef double t, ua1, ua2, ua3, ub1, ub2, ub3, um1, um2, um3
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef int i
    cdef int blew_up = 0
    cdef double blow_t = 0.0

    for j in range(7):
        x[j] = float(x0[j])
        states[0, j] = x[j]

    with nogil:
        for i in range(n_steps):
            t = t_start + i * h
            ua1 = u[i, 0]
            ua2 = u[i, 1]
            ua3 = u[i, 2]
            ub1 = u[i + 1, 0]
            ub2 = u[i + 1, 1]
            ub3 = u[i + 1, 2]
            um1 = 0.5 * (ua1 + ub1)
            um2 = 0.5 * (ua2 + ub2)
            um3 = 0.5 * (ua3 + ub3)

            _rhs_c(t, x, ua1, ua2, ua3, p, npop, k1)
            for j in range(7):
                derivs[i, j] = k1[j]
                x1[j] = x[j] + half * k1[j]
            _rhs_c(t + half, x1, um1, um2, um3, p, npop, k2)
            for j in range(7):
                x2[j] = x[j] + half * k2[j]
            _rhs_c(t + half, x2, um1, um2, um3, p, npop, k3)
            for j in range(7):
                x3[j] = x[j] + h * k3[j]
            _rhs_c(t + h, x3, ub1, ub2, ub3, p, npop, k4)

            for j in range(7):
                x[j] = x[j] + sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])
            if not _finite7(x):
                blew_up = 1
                blow_t = t + h
                break
            for j in range(7):
                states[i + 1, j] = x[j]

    if blew_up:
        raise NonFiniteStateError(blow_t, "state integration")

    _rhs_c(t_start + n_steps * h, x, u[n_steps, 0], u[n_steps, 1],
           u[n_steps, 2], p, npop, k1)
    for j in range(7):
        derivs[n_steps, j] = k1[j]
    return states_arr, derivs_arr


cdef inline void _adj_c(double t, double* psi, double* x,
                        double u1, double u2, double u3,
                        double* p, double* w, double n_pop, int form,
                        double* out) nogil:
    cdef double lam = _recovery(t, p[4], p[5], p[6])
    cdef double kap = _mortality(t, p[7], p[8], p[9])
    cdef double alpha = p[0]
    cdef double beta = p[1]
    cdef double gamma = p[2]
    cdef double delta = p[3]
    cdef double gap = w[0] - psi[0] + psi[1]
    cdef double c, rest, coup

    if form == 1:  # constant-N variant
        c = u1 * beta * gap / n_pop
        out[0] = -c * x[2] + (alpha + u2) * (psi[0] - psi[6])
        out[1] = gamma * (psi[1] - psi[2])
        out[2] = -c * x[0] + delta * (psi[2] - psi[3])
        out[3] = kap * (psi[3] - psi[5]) + (lam + u3) * (psi[3] - psi[4])
        out[4] = w[1]
        out[5] = 0.0
        out[6] = w[2]
        return

    rest = x[1] + x[2] + x[3] + x[4] + x[5] + x[6]
    coup = u1 * beta * x[0] * x[2] * gap / (n_pop * n_pop)
    out[0] = -u1 * beta * x[2] * rest * gap / (n_pop * n_pop) + (alpha + u2) * (psi[0] - psi[6])
    out[1] = coup + gamma * (psi[1] - psi[2])
    out[2] = -u1 * beta * x[0] * rest * gap / (n_pop * n_pop) + delta * (psi[2] - psi[3])
    out[3] = coup + kap * (psi[3] - psi[5]) + (lam + u3) * (psi[3] - psi[4])
    out[4] = coup + w[1]
    out[5] = coup
    out[6] = coup + w[2]


def adjoint_rhs(t, psi, x, u, params, weights, n_pop, form):
    """Single costate-RHS evaluation; returns a 7-tuple of derivatives."""
    cdef double[7] pv, xv, out
    cdef double[10] par
    cdef double[3] wv
    cdef int j
    for j in range(7):
        pv[j] = float(psi[j])
        xv[j] = float(x[j])
    for j in range(10):
        par[j] = float(params[j])
    for j in range(3):
        wv[j] = float(weights[j])
    _adj_c(float(t), pv, xv, float(u[0]), float(u[1]), float(u[2]),
           par, wv, float(n_pop), int(form), out)
    return (out[0], out[1], out[2], out[3], out[4], out[5], out[6])


def adjoint_backward(psi_f, t0, double h, int n_steps, states, derivs,
                     u_nodes, params, weights, n_pop, form):
    """RK4 sweep of the costate system from the terminal node down to t0.

    States at RK4 half-steps come from cubic Hermite interpolation of the
    stored node states and derivatives; controls interpolate linearly.
    Results are stored in forward node order.  Returns (psis, psi_derivs),
    both shaped (n_steps + 1, 7).
    """
    cdef double t_start = float(t0)
    cdef double npop = float(n_pop)
    cdef int form_c = int(form)
    cdef double[10] p
    cdef double[3] w
    cdef int j
    for j in range(10):
        p[j] = float(params[j])
    for j in range(3):
        w[j] = float(weights[j])

    xs_arr = np.ascontiguousarray(states, dtype=np.float64)
    fs_arr = np.ascontiguousarray(derivs, dtype=np.float64)
    u_arr = np.ascontiguousarray(u_nodes, dtype=np.float64)
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] fs = fs_arr
    cdef double[:, ::1] u = u_arr
    psis_arr = np.empty((n_steps + 1, 7))
    pderivs_arr = np.empty((n_steps + 1, 7))
    cdef double[:, ::1] psis = psis_arr
    cdef double[:, ::1] pderivs = pderivs_arr

    cdef double[7] psi, y1, y2, y3, k1, k2, k3, k4, xa, xb, xm
    cdef double t, ua1, ua2, ua3, ub1, ub2, ub3, um1, um2, um3
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef double eighth = h / 8.0
    cdef int i
    cdef int blew_up = 0
    cdef double blow_t = 0.0

    for j in range(7):
        psi[j] = float(psi_f[j])
        psis[n_steps, j] = psi[j]

    with nogil:
        for i in range(n_steps, 0, -1):
            t = t_start + i * h
            for j in range(7):
                xa[j] = xs[i, j]
                xb[j] = xs[i - 1, j]
                # Hermite midpoint of the state over [t_{i-1}, t_i].
                xm[j] = 0.5 * (xb[j] + xa[j]) + eighth * (fs[i - 1, j] - fs[i, j])
            ua1 = u[i, 0]
            ua2 = u[i, 1]
            ua3 = u[i, 2]
            ub1 = u[i - 1, 0]
            ub2 = u[i - 1, 1]
            ub3 = u[i - 1, 2]
            um1 = 0.5 * (ua1 + ub1)
            um2 = 0.5 * (ua2 + ub2)
            um3 = 0.5 * (ua3 + ub3)

            _adj_c(t, psi, xa, ua1, ua2, ua3, p, w, npop, form_c, k1)
            for j in range(7):
                pderivs[i, j] = k1[j]
                y1[j] = psi[j] - half * k1[j]
            _adj_c(t - half, y1, xm, um1, um2, um3, p, w, npop, form_c, k2)
            for j in range(7):
                y2[j] = psi[j] - half * k2[j]
            _adj_c(t - half, y2, xm, um1, um2, um3, p, w, npop, form_c, k3)
            for j in range(7):
                y3[j] = psi[j] - h * k3[j]
            _adj_c(t - h, y3, xb, ub1, ub2, ub3, p, w, npop, form_c, k4)

            for j in range(7):
                psi[j] = psi[j] - sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])
            if not _finite7(psi):
                blew_up = 1
                blow_t = t - h
                break
            for j in range(7):
                psis[i - 1, j] = psi[j]

    if blew_up:
        raise NonFiniteStateError(blow_t, "state integration")

    for j in range(7):
        xb[j] = xs[0, j]
    _adj_c(t_start, psi, xb, u[0, 0], u[0, 1], u[0, 2], p, w, npop, form_c, k1)
    for j in range(7):
        pderivs[0, j] = k1[j]
    return psis_arr, pderivs_arr
