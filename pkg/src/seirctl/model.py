"""Domain types and right-hand sides of the 7-compartment epidemic model.

Compartments: susceptible S, exposed E, infectious I, quarantined Q,
recovered R, dead D, protected P.  The controlled dynamics scale the
infection flow by u1, add u2 to the protection rate, and add u3 to the
time-varying recovery rate; the base model is the u = (1, 0, 0) case of the
same right-hand side, so both share one code path bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .errors import InvalidStateError
from .integrate import TimeGrid, Trajectory


class StateVec(NamedTuple):
    """Compartment values at one instant (individuals)."""

    S: float
    E: float
    I: float
    Q: float
    R: float
    D: float
    P: float


class ControlVec(NamedTuple):
    """Control levels: contact reduction u1, protection u2, treatment u3."""

    u1: float
    u2: float
    u3: float


UNCONTROLLED = ControlVec(1.0, 0.0, 0.0)

PARAM_NAMES = (
    "alpha",
    "beta",
    "gamma",
    "delta",
    "lam1",
    "lam2",
    "lam3",
    "kap1",
    "kap2",
    "kap3",
)


@dataclass(frozen=True)
class ModelParams:
    """Flow-rate parameters (per day; lam3, kap3 are times in days).

    alpha: protection rate, beta: infection rate, gamma: inverse average
    latent time, delta: quarantine entry rate.  (lam1, lam2, lam3)
    parameterize the logistic recovery rate and (kap1, kap2, kap3) the
    bell-shaped mortality rate.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    lam1: float
    lam2: float
    lam3: float
    kap1: float
    kap2: float
    kap3: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if v < 0.0:
                raise ValueError(f"{name} must be nonnegative, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    @classmethod
    def from_array(cls, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (len(PARAM_NAMES),):
            raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got {vec.shape}")
        return cls(*vec)


@dataclass(frozen=True)
class ControlBounds:
    """Admissible box: lower[i] <= u[i] <= upper[i] for each control."""

    lower: ControlVec
    upper: ControlVec

    def __post_init__(self):
        lo = ControlVec(*(float(v) for v in self.lower))
        hi = ControlVec(*(float(v) for v in self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        for i in range(3):
            if lo[i] > hi[i]:
                raise ValueError(f"bounds for u{i + 1} reversed: [{lo[i]}, {hi[i]}]")

    def clip(self, u) -> ControlVec:
        return ControlVec(
            *(min(max(float(u[i]), self.lower[i]), self.upper[i]) for i in range(3))
        )

    def contains(self, u, tol: float = 0.0) -> bool:
        return all(
            self.lower[i] - tol <= float(u[i]) <= self.upper[i] + tol for i in range(3)
        )

    def midpoint(self) -> ControlVec:
        return ControlVec(*(0.5 * (self.lower[i] + self.upper[i]) for i in range(3)))


@dataclass(frozen=True)
class PopulationConstant:
    """Total population N; fixed by the initial state and conserved after."""

    n: float

    def __post_init__(self):
        object.__setattr__(self, "n", float(self.n))
        if not (self.n > 0.0):
            raise ValueError(f"population must be positive, got {self.n}")

    @classmethod
    def from_state(cls, x0) -> "PopulationConstant":
        return cls(total_population(x0))


def total_population(x) -> float:
    """Componentwise sum of the state vector."""
    S, E, I, Q, R, D, P = (float(v) for v in x)
    return S + E + I + Q + R + D + P


def recovery_rate(t: float, p: ModelParams) -> float:
    """Time-varying recovery rate: logistic ramp lam1/(1 + exp(-lam2 (t - lam3)))."""
    return kernels.recovery_rate(float(t), p.lam1, p.lam2, p.lam3)


def mortality_rate(t: float, p: ModelParams) -> float:
    """Time-varying mortality rate: peak kap1/2 at t = kap3, decaying both ways."""
    return kernels.mortality_rate(float(t), p.kap1, p.kap2, p.kap3)


def rhs_controlled(
    t: float, x, u, p: ModelParams, n: PopulationConstant
) -> StateVec:
    """Controlled compartment derivatives at time t (individuals/day)."""
    return StateVec(*kernels.rhs_controlled(t, x, u, p.as_array(), n.n))


def rhs_uncontrolled(t: float, x, p: ModelParams, n: PopulationConstant) -> StateVec:
    """Base-model derivatives: the u = (1, 0, 0) case of rhs_controlled."""
    return rhs_controlled(t, x, UNCONTROLLED, p, n)


def check_nonnegative(states, n: PopulationConstant, grid: TimeGrid, tol_scale: float = 1e-9) -> None:
    """Reject compartment values below -tol_scale*N (integration undershoot allowance)."""
    states = np.asarray(states)
    bad = np.argwhere(states < -tol_scale * n.n)
    if bad.size:
        i, j = bad[0]
        t = grid.t0 + i * grid.h
        raise InvalidStateError(
            f"compartment {StateVec._fields[j]} = {states[i, j]} below zero at t = {t}"
        )


def _control_nodes(controls, grid: TimeGrid) -> np.ndarray:
    """Normalize a control specification to an (n_nodes, 3) array."""
    if controls is None:
        u = np.asarray(UNCONTROLLED, dtype=float)
        return np.tile(u, (grid.n_nodes, 1))
    if isinstance(controls, Trajectory):
        arr = controls.values
    else:
        arr = np.asarray(controls, dtype=float)
        if arr.shape == (3,):
            return np.tile(arr, (grid.n_nodes, 1))
    if arr.shape != (grid.n_nodes, 3):
        raise ValueError(f"controls must have shape ({grid.n_nodes}, 3), got {arr.shape}")
    return arr


def simulate(
    p: ModelParams,
    x0,
    n: PopulationConstant,
    grid: TimeGrid,
    controls=None,
    nonneg_check: bool = True,
) -> Trajectory:
    """RK4 sweep of the model over the grid; returns states with derivatives.

    ``controls`` may be None (base model), a constant (u1, u2, u3), a
    per-node (n_nodes, 3) array, or a control Trajectory on the same grid.
    """
    u_nodes = _control_nodes(controls, grid)
    states, derivs = kernels.sim_forward(
        np.asarray(x0, dtype=float), grid.t0, grid.h, grid.n_steps, p.as_array(), n.n, u_nodes
    )
    if nonneg_check:
        check_nonnegative(states, n, grid)
    return Trajectory(grid, states, derivs)
