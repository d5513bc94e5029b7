"""Optimal intervention computation via Pontryagin extremals.

The running cost charges new infections and quadratic control effort and
rewards recovered and protected populations.  Candidate optima satisfy the
first-order conditions: states forward, costates backward from a zero
terminal condition, and a pointwise Hamiltonian minimization that reduces to
clipping a closed-form expression to the admissible box.  The solver
iterates these three maps with relaxation (a forward-backward sweep).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .integrate import TimeGrid, Trajectory, interpolate
from .model import (
    ControlBounds,
    ControlVec,
    ModelParams,
    PopulationConstant,
    StateVec,
    check_nonnegative,
)


class AdjointVec(NamedTuple):
    """Costate values paired with the seven compartments."""

    psi1: float
    psi2: float
    psi3: float
    psi4: float
    psi5: float
    psi6: float
    psi7: float


@dataclass(frozen=True)
class CostWeights:
    """Objective weights w1..w3 and control-effort weights v1..v3."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    v1: float = 1.0
    v2: float = 1.0
    v3: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "v1", "v2", "v3"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if min(self.v1, self.v2, self.v3) <= 0.0:
            raise ValueError("control-effort weights v1, v2, v3 must be positive")


ADJOINT_FORMS = {
    "printed": kernels.ADJOINT_PRINTED,
    "constant_n": kernels.ADJOINT_CONSTANT_N,
}


@dataclass(frozen=True)
class FbsmOptions:
    """Sweep-iteration settings.

    adjoint_form selects how the costate equations treat the population
    total: "printed" differentiates it as the sum of compartments,
    "constant_n" holds it fixed.  Both yield the same control updates at a
    sweep fixed point; only "constant_n" is the exact gradient of the
    implemented cost (see gradient_check).
    """

    relaxation: float = 0.5
    tol_rel: float = 1e-4
    max_iter: int = 500
    adjoint_form: str = "printed"
    min_relaxation: float = 1.0 / 1024.0
    stall_window: int = 10

    def __post_init__(self):
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError(f"relaxation must be in (0, 1], got {self.relaxation}")
        if self.tol_rel <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")
        if self.adjoint_form not in ADJOINT_FORMS:
            raise ValueError(f"unknown adjoint form {self.adjoint_form!r}")


@dataclass(frozen=True)
class OptimalSolution:
    """Converged (or last-iterate) extremal candidate."""

    states: Trajectory
    adjoints: Trajectory
    controls: Trajectory
    cost: float
    iterations: int
    converged: bool


def _integrand_nodes(sv: np.ndarray, uv: np.ndarray, w: CostWeights, p: ModelParams, n: PopulationConstant) -> np.ndarray:
    S = sv[:, 0]
    I = sv[:, 2]
    R = sv[:, 4]
    P = sv[:, 6]
    u1 = uv[:, 0]
    u2 = uv[:, 1]
    u3 = uv[:, 2]
    effort = 0.5 * (w.v1 * u1 * u1 + w.v2 * u2 * u2 + w.v3 * u3 * u3)
    return w.w1 * p.beta * u1 * S * I / n.n + effort - w.w2 * R - w.w3 * P


def _trapezoid(g: np.ndarray, h: float) -> float:
    return h * (0.5 * (g[0] + g[-1]) + g[1:-1].sum())


def cost(
    states: Trajectory,
    controls: Trajectory,
    w: CostWeights,
    p: ModelParams,
    n: PopulationConstant,
) -> float:
    """Composite-trapezoid value of the running cost over the shared grid."""
    if states.grid != controls.grid:
        raise ValueError("state and control trajectories use different grids")
    g = _integrand_nodes(states.values, controls.values, w, p, n)
    return _trapezoid(g, states.grid.h)


def hamiltonian(
    x,
    u,
    psi,
    t: float,
    p: ModelParams,
    w: CostWeights,
    n: PopulationConstant,
) -> float:
    """Running cost plus costate-weighted dynamics at one point."""
    S = float(x[0])
    I = float(x[2])
    R = float(x[4])
    P = float(x[6])
    u1, u2, u3 = (float(v) for v in u)
    g = (
        w.w1 * p.beta * u1 * S * I / n.n
        + 0.5 * (w.v1 * u1 * u1 + w.v2 * u2 * u2 + w.v3 * u3 * u3)
        - w.w2 * R
        - w.w3 * P
    )
    f = kernels.rhs_controlled(t, x, u, p.as_array(), n.n)
    return g + sum(float(psi[i]) * f[i] for i in range(7))


def _at(traj_or_point, t: float) -> np.ndarray:
    if isinstance(traj_or_point, Trajectory):
        return interpolate(traj_or_point, t)
    return np.asarray(traj_or_point, dtype=float)


def adjoint_rhs(
    t: float,
    psi,
    x_of_t,
    u_of_t,
    p: ModelParams,
    w: CostWeights,
    n: PopulationConstant,
    form: str = "printed",
) -> AdjointVec:
    """Costate derivatives at time t; x_of_t / u_of_t may be trajectories or points."""
    x = _at(x_of_t, t)
    u = _at(u_of_t, t)
    out = kernels.adjoint_rhs(
        t, psi, x, u, p.as_array(), (w.w1, w.w2, w.w3), n.n, ADJOINT_FORMS[form]
    )
    return AdjointVec(*out)


def _update_nodes(
    sv: np.ndarray,
    pv: np.ndarray,
    p: ModelParams,
    w: CostWeights,
    b: ControlBounds,
    n: PopulationConstant,
) -> np.ndarray:
    """Unclipped Hamiltonian minimizers at every node, then boxed."""
    S = sv[:, 0]
    I = sv[:, 2]
    Q = sv[:, 3]
    psi1 = pv[:, 0]
    psi2 = pv[:, 1]
    psi4 = pv[:, 3]
    psi5 = pv[:, 4]
    psi7 = pv[:, 6]
    u = np.empty((sv.shape[0], 3))
    u[:, 0] = p.beta * S * I * (psi1 - psi2 - w.w1) / (n.n * w.v1)
    u[:, 1] = S * (psi1 - psi7) / w.v2
    u[:, 2] = Q * (psi4 - psi5) / w.v3
    np.clip(u, np.asarray(b.lower), np.asarray(b.upper), out=u)
    return u


def control_update(
    x,
    psi,
    p: ModelParams,
    w: CostWeights,
    b: ControlBounds,
    n: PopulationConstant,
) -> ControlVec:
    """Pointwise minimizer of the Hamiltonian over the admissible box."""
    sv = np.asarray(x, dtype=float).reshape(1, 7)
    pv = np.asarray(psi, dtype=float).reshape(1, 7)
    return ControlVec(*_update_nodes(sv, pv, p, w, b, n)[0])


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(new))), float(np.max(np.abs(old))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(new - old))) / scale


def solve_fbsm(
    p: ModelParams,
    x0,
    w: CostWeights,
    b: ControlBounds,
    grid: TimeGrid,
    opts: FbsmOptions | None = None,
    n: PopulationConstant | None = None,
) -> OptimalSolution:
    """Forward-backward sweep iteration for the control problem.

    Each pass integrates the states forward under the current control,
    integrates the costates backward from zero, forms the pointwise control
    update, and relaxes u <- (1 - omega) u + omega u_new.  Iteration stops
    when the control fixed-point residual |u_new - u| (scaled by the bound
    magnitudes) and the state and costate changes all fall below tol_rel.

    Strong costate feedback can lock the transition band of a near-bang-bang
    control into a period-2 flip; omega is halved (down to min_relaxation)
    whenever the residual stagnates for stall_window iterations or the cost
    rises beyond tol_rel*|J| twice, which damps the flip into convergence.

    Non-convergence within max_iter is reported via the flag, not raised.
    """
    if opts is None:
        opts = FbsmOptions()
    x0a = np.asarray(x0, dtype=float)
    if n is None:
        n = PopulationConstant(float(x0a.sum()))
    pa = p.as_array()
    wa = (w.w1, w.w2, w.w3)
    form = ADJOINT_FORMS[opts.adjoint_form]
    lo = np.asarray(b.lower)
    hi = np.asarray(b.upper)
    zero7 = np.zeros(7)
    # Controls are O(1) by construction; measure their changes against the
    # box magnitude so a control converging to 0 still registers.
    bscale = max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi))), 1.0)

    u = np.tile(np.asarray(b.midpoint()), (grid.n_nodes, 1))
    omega = opts.relaxation
    violations = 0
    stalls = 0
    best_residual = np.inf
    prev_states = prev_psis = None
    prev_cost = None
    converged = False
    iterations = 0

    for it in range(1, opts.max_iter + 1):
        iterations = it
        states, sder = kernels.sim_forward(
            x0a, grid.t0, grid.h, grid.n_steps, pa, n.n, u
        )
        psis, _ = kernels.adjoint_backward(
            zero7, grid.t0, grid.h, grid.n_steps, states, sder, u, pa, wa, n.n, form
        )
        value = _trapezoid(_integrand_nodes(states, u, w, p, n), grid.h)
        u_new = _update_nodes(states, psis, p, w, b, n)
        residual = float(np.max(np.abs(u_new - u))) / bscale

        settled = residual <= opts.tol_rel
        if prev_states is not None:
            settled = (
                settled
                and _rel_change(states, prev_states) <= opts.tol_rel
                and _rel_change(psis, prev_psis) <= opts.tol_rel
            )
        if settled:
            converged = True
            break

        halve = False
        if prev_cost is not None and value > prev_cost + opts.tol_rel * abs(prev_cost):
            violations += 1
            if violations >= 2:
                halve = True
        if residual >= 0.95 * best_residual:
            stalls += 1
            if stalls >= opts.stall_window:
                halve = True
        else:
            best_residual = residual
            stalls = 0
        if halve:
            omega = max(0.5 * omega, opts.min_relaxation)
            violations = 0
            stalls = 0
            best_residual = residual

        prev_states, prev_psis, prev_cost = states, psis, value
        u = (1.0 - omega) * u + omega * u_new
        np.clip(u, lo, hi, out=u)

    # Re-sweep once so the returned states and costates correspond exactly
    # to the returned control iterate.
    states, sder = kernels.sim_forward(x0a, grid.t0, grid.h, grid.n_steps, pa, n.n, u)
    psis, pder = kernels.adjoint_backward(
        zero7, grid.t0, grid.h, grid.n_steps, states, sder, u, pa, wa, n.n, form
    )
    value = _trapezoid(_integrand_nodes(states, u, w, p, n), grid.h)
    check_nonnegative(states, n, grid)
    return OptimalSolution(
        states=Trajectory(grid, states, sder),
        adjoints=Trajectory(grid, psis, pder),
        controls=Trajectory(grid, u),
        cost=float(value),
        iterations=iterations,
        converged=converged,
    )


def gradient_check(
    p: ModelParams,
    x0,
    w: CostWeights,
    b: ControlBounds,
    grid: TimeGrid,
    u,
    component: int,
    node: int,
    epsilon: float,
    n: PopulationConstant | None = None,
    adjoint_form: str = "constant_n",
) -> tuple[float, float]:
    """Two estimates of dJ/du at one control node: costate formula vs central differences.

    The costate estimate is the trapezoid weight of the node times the
    Hamiltonian's partial derivative in the probed control; the reference is
    a central finite-difference quotient of the full cost under a one-node
    bump of size epsilon.  The probed control must be strictly inside its
    bounds.  Defaults to the constant_n costate form, the exact adjoint of
    the implemented dynamics.
    """
    x0a = np.asarray(x0, dtype=float)
    if n is None:
        n = PopulationConstant(float(x0a.sum()))
    u_nodes = np.array(u.values if isinstance(u, Trajectory) else u, dtype=float)
    if u_nodes.shape != (grid.n_nodes, 3):
        raise ValueError(f"controls must have shape ({grid.n_nodes}, 3)")
    if not (0 <= node < grid.n_nodes) or not (0 <= component < 3):
        raise ValueError(f"probe ({node}, {component}) out of range")
    uk = u_nodes[node, component]
    if not (b.lower[component] < uk < b.upper[component]):
        raise ValueError(
            f"control u{component + 1} = {uk} sits on a bound at node {node}"
        )

    pa = p.as_array()
    states, sder = kernels.sim_forward(
        x0a, grid.t0, grid.h, grid.n_steps, pa, n.n, u_nodes
    )
    psis, _ = kernels.adjoint_backward(
        np.zeros(7),
        grid.t0,
        grid.h,
        grid.n_steps,
        states,
        sder,
        u_nodes,
        pa,
        (w.w1, w.w2, w.w3),
        n.n,
        ADJOINT_FORMS[adjoint_form],
    )
    S = states[node, 0]
    I = states[node, 2]
    Q = states[node, 3]
    psi = psis[node]
    if component == 0:
        dh = w.v1 * uk - p.beta * S * I * (psi[0] - psi[1] - w.w1) / n.n
    elif component == 1:
        dh = w.v2 * uk - S * (psi[0] - psi[6])
    else:
        dh = w.v3 * uk - Q * (psi[3] - psi[4])
    rho = grid.h if 0 < node < grid.n_nodes - 1 else 0.5 * grid.h
    adjoint_grad = rho * dh

    def bumped_cost(sign: float) -> float:
        ub = u_nodes.copy()
        ub[node, component] = uk + sign * epsilon
        sb, _ = kernels.sim_forward(x0a, grid.t0, grid.h, grid.n_steps, pa, n.n, ub)
        return _trapezoid(_integrand_nodes(sb, ub, w, p, n), grid.h)

    fd_grad = (bumped_cost(1.0) - bumped_cost(-1.0)) / (2.0 * epsilon)
    return adjoint_grad, fd_grad


SOLUTION_COLUMNS = list(StateVec._fields) + [f"psi{i}" for i in range(1, 8)] + [
    "u1",
    "u2",
    "u3",
]


def write_solution_csv(sol: OptimalSolution, path) -> None:
    """One CSV with columns t, S..P, psi1..psi7, u1..u3."""
    grid = sol.states.grid
    ts = grid.nodes()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + SOLUTION_COLUMNS) + "\n")
        for i, t in enumerate(ts):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in sol.states.values[i]]
            row += [repr(float(v)) for v in sol.adjoints.values[i]]
            row += [repr(float(v)) for v in sol.controls.values[i]]
            fh.write(",".join(row) + "\n")
