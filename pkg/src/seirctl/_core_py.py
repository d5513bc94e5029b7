"""Pure-Python fallback for the compiled simulation kernels.

Mirrors ``seirctl._core`` operation for operation, in the same arithmetic
order, so the two backends produce matching trajectories.  All kernels work
on raw floats / ndarrays; the typed public API lives in the sibling modules.

Parameter vector layout (10 entries):
    alpha, beta, gamma, delta, lambda1, lambda2, lambda3, kappa1, kappa2, kappa3
Weight vector layout (3 entries): w1, w2, w3.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteStateError

COMPILED = False

# Exponent clamp for the time-varying rates; keeps exp() finite for
# exploratory parameter values far from the data window.
EXP_CLAMP = 700.0

ADJOINT_PRINTED = 0
ADJOINT_CONSTANT_N = 1


def _cexp(a: float) -> float:
    if a > EXP_CLAMP:
        a = EXP_CLAMP
    elif a < -EXP_CLAMP:
        a = -EXP_CLAMP
    return math.exp(a)


def recovery_rate(t: float, lam1: float, lam2: float, lam3: float) -> float:
    """Logistic-in-time recovery rate lam1 / (1 + exp(-lam2*(t - lam3)))."""
    return lam1 / (1.0 + _cexp(-lam2 * (t - lam3)))


def mortality_rate(t: float, kap1: float, kap2: float, kap3: float) -> float:
    """Bell-shaped mortality rate kap1 / (exp(a) + exp(-a)), a = kap2*(t - kap3)."""
    a = kap2 * (t - kap3)
    return kap1 / (_cexp(a) + _cexp(-a))


def _rhs(t, x, u1, u2, u3, p, n_pop):
    """Controlled compartment derivatives; u = (1, 0, 0) gives the base model."""
    S, E, I, Q, R, D, P = x
    lam = recovery_rate(t, p[4], p[5], p[6])
    kap = mortality_rate(t, p[7], p[8], p[9])
    infect = p[1] * u1 * S * I / n_pop
    protect = (p[0] + u2) * S
    latent = p[2] * E
    quarantine = p[3] * I
    recover = (lam + u3) * Q
    die = kap * Q
    return (
        -infect - protect,
        infect - latent,
        latent - quarantine,
        quarantine - recover - die,
        recover,
        die,
        protect,
    )


def rhs_controlled(t, x, u, params, n_pop):
    """Single controlled-RHS evaluation; returns a 7-tuple of derivatives."""
    return _rhs(
        float(t),
        tuple(float(v) for v in x),
        float(u[0]),
        float(u[1]),
        float(u[2]),
        tuple(float(v) for v in params),
        float(n_pop),
    )


def _check_finite(x, t):
    for v in x:
        if not math.isfinite(v):
            raise NonFiniteStateError(t, "state integration")


def sim_forward(x0, t0, h, n_steps, params, n_pop, u_nodes):
    """Classical RK4 sweep of the controlled model over a fixed grid.

    ``u_nodes`` holds one (u1, u2, u3) triple per node; values at the RK4
    half-step come from linear interpolation between adjacent nodes, which
    keeps every queried control inside its admissible box.

    Returns (states, derivs), both shaped (n_steps + 1, 7); derivs[i] is the
    controlled RHS evaluated at node i (used for dense cubic interpolation).
    """
    t0 = float(t0)
    h = float(h)
    n_pop = float(n_pop)
    p = tuple(float(v) for v in params)
    u = np.asarray(u_nodes, dtype=float)
    states = np.empty((n_steps + 1, 7))
    derivs = np.empty((n_steps + 1, 7))

    x = tuple(float(v) for v in x0)
    states[0] = x
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        t = t0 + i * h
        # plain floats: keeps the arithmetic on CPython doubles (quiet inf
        # propagation) instead of warning-prone numpy scalars
        ua1 = float(u[i, 0])
        ua2 = float(u[i, 1])
        ua3 = float(u[i, 2])
        ub1 = float(u[i + 1, 0])
        ub2 = float(u[i + 1, 1])
        ub3 = float(u[i + 1, 2])
        um1 = 0.5 * (ua1 + ub1)
        um2 = 0.5 * (ua2 + ub2)
        um3 = 0.5 * (ua3 + ub3)

        k1 = _rhs(t, x, ua1, ua2, ua3, p, n_pop)
        derivs[i] = k1
        x1 = tuple(x[j] + half * k1[j] for j in range(7))
        k2 = _rhs(t + half, x1, um1, um2, um3, p, n_pop)
        x2 = tuple(x[j] + half * k2[j] for j in range(7))
        k3 = _rhs(t + half, x2, um1, um2, um3, p, n_pop)
        x3 = tuple(x[j] + h * k3[j] for j in range(7))
        k4 = _rhs(t + h, x3, ub1, ub2, ub3, p, n_pop)

        x = tuple(
            x[j] + sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]) for j in range(7)
        )
        _check_finite(x, t + h)
        states[i + 1] = x

    derivs[n_steps] = _rhs(
        t0 + n_steps * h,
        x,
        float(u[n_steps, 0]),
        float(u[n_steps, 1]),
        float(u[n_steps, 2]),
        p,
        n_pop,
    )
    return states, derivs


def _adjoint_rhs(t, psi, x, u1, u2, u3, p, w, n_pop, form):
    """Costate derivatives for the controlled model.

    ``form`` selects between the published equations (which carry
    (x2+...+x7)/N^2 factors from differentiating with N taken as the sum of
    compartments) and the constant-N variant obtained by differentiating with
    N held fixed.  The two agree on control updates at a fixed point but only
    the constant-N variant is the exact gradient of the implemented cost.
    """
    p1, p2, p3, p4, p5, p6, p7 = psi
    x1, x2, x3, x4, x5, x6, x7 = x
    lam = recovery_rate(t, p[4], p[5], p[6])
    kap = mortality_rate(t, p[7], p[8], p[9])
    w1, w2, w3 = w
    alpha = p[0]
    beta = p[1]
    gamma = p[2]
    delta = p[3]
    gap = w1 - p1 + p2

    if form == ADJOINT_CONSTANT_N:
        c = u1 * beta * gap / n_pop
        return (
            -c * x3 + (alpha + u2) * (p1 - p7),
            gamma * (p2 - p3),
            -c * x1 + delta * (p3 - p4),
            kap * (p4 - p6) + (lam + u3) * (p4 - p5),
            w2,
            0.0,
            w3,
        )

    rest = x2 + x3 + x4 + x5 + x6 + x7
    coup = u1 * beta * x1 * x3 * gap / (n_pop * n_pop)
    return (
        -u1 * beta * x3 * rest * gap / (n_pop * n_pop) + (alpha + u2) * (p1 - p7),
        coup + gamma * (p2 - p3),
        -u1 * beta * x1 * rest * gap / (n_pop * n_pop) + delta * (p3 - p4),
        coup + kap * (p4 - p6) + (lam + u3) * (p4 - p5),
        coup + w2,
        coup,
        coup + w3,
    )


def adjoint_rhs(t, psi, x, u, params, weights, n_pop, form):
    """Single costate-RHS evaluation; returns a 7-tuple of derivatives."""
    return _adjoint_rhs(
        float(t),
        tuple(float(v) for v in psi),
        tuple(float(v) for v in x),
        float(u[0]),
        float(u[1]),
        float(u[2]),
        tuple(float(v) for v in params),
        tuple(float(v) for v in weights),
        float(n_pop),
        int(form),
    )


def adjoint_backward(psi_f, t0, h, n_steps, states, derivs, u_nodes, params, weights, n_pop, form):
    """RK4 sweep of the costate system from the terminal node down to t0.

    States at RK4 half-steps come from cubic Hermite interpolation of the
    stored node states and derivatives; controls interpolate linearly.
    Results are stored in forward node order.  Returns (psis, psi_derivs),
    both shaped (n_steps + 1, 7).
    """
    t0 = float(t0)
    h = float(h)
    n_pop = float(n_pop)
    p = tuple(float(v) for v in params)
    w = tuple(float(v) for v in weights)
    form = int(form)
    xs = np.asarray(states, dtype=float)
    fs = np.asarray(derivs, dtype=float)
    u = np.asarray(u_nodes, dtype=float)
    psis = np.empty((n_steps + 1, 7))
    psi_derivs = np.empty((n_steps + 1, 7))

    psi = tuple(float(v) for v in psi_f)
    psis[n_steps] = psi
    half = 0.5 * h
    sixth = h / 6.0
    eighth = h / 8.0
    for i in range(n_steps, 0, -1):
        t = t0 + i * h
        xa = tuple(float(v) for v in xs[i])
        xb = tuple(float(v) for v in xs[i - 1])
        # Hermite midpoint of the state over [t_{i-1}, t_i].
        xm = tuple(
            0.5 * (xb[j] + xa[j]) + eighth * (float(fs[i - 1, j]) - float(fs[i, j]))
            for j in range(7)
        )
        ua1, ua2, ua3 = float(u[i, 0]), float(u[i, 1]), float(u[i, 2])
        ub1, ub2, ub3 = float(u[i - 1, 0]), float(u[i - 1, 1]), float(u[i - 1, 2])
        um1 = 0.5 * (ua1 + ub1)
        um2 = 0.5 * (ua2 + ub2)
        um3 = 0.5 * (ua3 + ub3)

        k1 = _adjoint_rhs(t, psi, xa, ua1, ua2, ua3, p, w, n_pop, form)
        psi_derivs[i] = k1
        y1 = tuple(psi[j] - half * k1[j] for j in range(7))
        k2 = _adjoint_rhs(t - half, y1, xm, um1, um2, um3, p, w, n_pop, form)
        y2 = tuple(psi[j] - half * k2[j] for j in range(7))
        k3 = _adjoint_rhs(t - half, y2, xm, um1, um2, um3, p, w, n_pop, form)
        y3 = tuple(psi[j] - h * k3[j] for j in range(7))
        k4 = _adjoint_rhs(t - h, y3, xb, ub1, ub2, ub3, p, w, n_pop, form)

        psi = tuple(
            psi[j] - sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]) for j in range(7)
        )
        _check_finite(psi, t - h)
        psis[i - 1] = psi

    psi_derivs[0] = _adjoint_rhs(
        t0,
        psi,
        tuple(float(v) for v in xs[0]),
        float(u[0, 0]),
        float(u[0, 1]),
        float(u[0, 2]),
        p,
        w,
        n_pop,
        form,
    )
    return psis, psi_derivs
