"""Fixed-step RK4 integration on a shared time grid, with dense output.

Forward and backward sweeps of the optimal-control iteration must query
states between nodes (RK4 interior stages), so trajectories store the node
derivatives and interpolate with cubic Hermite polynomials.  Trajectories
without derivatives (control iterates) fall back to linear interpolation,
which keeps interpolated controls inside their admissible box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteStateError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0, t0 + h, ..., tf; tf must be a whole number of steps."""

    t0: float
    tf: float
    h: float

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))
        object.__setattr__(self, "h", float(self.h))
        if not (self.tf > self.t0):
            raise ValueError(f"need tf > t0, got [{self.t0}, {self.tf}]")
        if not (self.h > 0.0):
            raise ValueError(f"step must be positive, got {self.h}")
        steps = (self.tf - self.t0) / self.h
        if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)):
            raise ValueError(
                f"grid does not land on tf: ({self.tf} - {self.t0})/{self.h} = {steps}"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.tf - self.t0) / self.h))

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_nodes)

    def refined(self, factor: int) -> "TimeGrid":
        """Same span with the step divided by an integer factor."""
        return TimeGrid(self.t0, self.tf, self.h / int(factor))


@dataclass(frozen=True)
class Trajectory:
    """Per-node vectors on a TimeGrid, optionally with node derivatives."""

    grid: TimeGrid
    values: np.ndarray
    derivs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.atleast_2d(np.asarray(self.values, dtype=float)))
        if vals.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"value count {vals.shape[0]} != node count {self.grid.n_nodes}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.derivs is not None:
            ders = np.ascontiguousarray(np.asarray(self.derivs, dtype=float))
            if ders.shape != vals.shape:
                raise ValueError("derivative array shape must match values")
            ders.flags.writeable = False
            object.__setattr__(self, "derivs", ders)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        return interpolate(self, t)


def _locate(grid: TimeGrid, t: float) -> tuple[int, float]:
    """Bracket index i and local coordinate s in [0, 1] for time t."""
    span_tol = 1e-9 * max(1.0, abs(grid.t0), abs(grid.tf))
    if t < grid.t0 - span_tol or t > grid.tf + span_tol:
        raise ValueError(f"time {t} outside grid [{grid.t0}, {grid.tf}]")
    pos = (t - grid.t0) / grid.h
    i = min(max(int(math.floor(pos)), 0), grid.n_steps - 1)
    return i, pos - i


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Value at time t: cubic Hermite when derivatives are stored, else linear.

    Exact at nodes in both modes.
    """
    grid = traj.grid
    i, s = _locate(grid, t)
    a = traj.values[i]
    b = traj.values[i + 1]
    if traj.derivs is None:
        return a + s * (b - a)
    fa = traj.derivs[i]
    fb = traj.derivs[i + 1]
    s2 = s * s
    h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s)
    h10 = s * (1.0 - s) * (1.0 - s)
    h01 = s2 * (3.0 - 2.0 * s)
    h11 = s2 * (s - 1.0)
    return h00 * a + (h10 * grid.h) * fa + h01 * b + (h11 * grid.h) * fb


def _as_vector(x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError("initial value must be a vector")
    return v


def _check_stage(y: np.ndarray, t: float, what: str) -> None:
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(t, what)


def integrate_forward(rhs, x0, grid: TimeGrid) -> Trajectory:
    """Classical RK4 from t0 to tf; node 0 stores x0 exactly.

    ``rhs(t, x)`` must return the derivative vector.  Any NaN or Inf in a
    stage or node aborts with the first offending time.
    """
    x = _as_vector(x0)
    _check_stage(x, grid.t0, "initial value")
    n = grid.n_steps
    h = grid.h
    half = 0.5 * h
    sixth = h / 6.0
    values = np.empty((n + 1, x.size))
    derivs = np.empty_like(values)
    values[0] = x
    for i in range(n):
        t = grid.t0 + i * h
        k1 = np.asarray(rhs(t, x), dtype=float)
        _check_stage(k1, t, "rhs stage")
        k2 = np.asarray(rhs(t + half, x + half * k1), dtype=float)
        _check_stage(k2, t + half, "rhs stage")
        k3 = np.asarray(rhs(t + half, x + half * k2), dtype=float)
        _check_stage(k3, t + half, "rhs stage")
        k4 = np.asarray(rhs(t + h, x + h * k3), dtype=float)
        _check_stage(k4, t + h, "rhs stage")
        derivs[i] = k1
        x = x + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        _check_stage(x, t + h, "node value")
        values[i + 1] = x
    derivs[n] = np.asarray(rhs(grid.tf, x), dtype=float)
    return Trajectory(grid, values, derivs)


def integrate_backward(rhs, psi_f, grid: TimeGrid) -> Trajectory:
    """Classical RK4 from tf down to t0; results stored in forward node order.

    The terminal node stores psi_f exactly.
    """
    y = _as_vector(psi_f)
    _check_stage(y, grid.tf, "terminal value")
    n = grid.n_steps
    h = grid.h
    half = 0.5 * h
    sixth = h / 6.0
    values = np.empty((n + 1, y.size))
    derivs = np.empty_like(values)
    values[n] = y
    for i in range(n, 0, -1):
        t = grid.t0 + i * h
        k1 = np.asarray(rhs(t, y), dtype=float)
        _check_stage(k1, t, "rhs stage")
        k2 = np.asarray(rhs(t - half, y - half * k1), dtype=float)
        _check_stage(k2, t - half, "rhs stage")
        k3 = np.asarray(rhs(t - half, y - half * k2), dtype=float)
        _check_stage(k3, t - half, "rhs stage")
        k4 = np.asarray(rhs(t - h, y - h * k3), dtype=float)
        _check_stage(k4, t - h, "rhs stage")
        derivs[i] = k1
        y = y - sixth * (k1 + 2.0 * (k2 + k3) + k4)
        _check_stage(y, t - h, "node value")
        values[i - 1] = y
    derivs[0] = np.asarray(rhs(grid.t0, y), dtype=float)
    return Trajectory(grid, values, derivs)


def write_csv(traj: Trajectory, path, names) -> None:
    """Write the trajectory as CSV with columns t, <names...>."""
    names = list(names)
    if len(names) != traj.dim:
        raise ValueError(f"got {len(names)} column names for dimension {traj.dim}")
    ts = traj.grid.nodes()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        for t, row in zip(ts, traj.values):
            fh.write(",".join([repr(float(t))] + [repr(float(v)) for v in row]) + "\n")


def read_csv(path) -> tuple[list[str], Trajectory]:
    """Read a trajectory CSV written by write_csv; returns (names, trajectory)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = list(data.dtype.names)
    if not names or names[0] != "t":
        raise ValueError(f"{path}: first column must be t")
    rows = np.atleast_1d(data)
    ts = rows["t"]
    if ts.size < 2:
        raise ValueError(f"{path}: need at least two rows to form a grid")
    h = ts[1] - ts[0]
    if h <= 0 or not np.allclose(np.diff(ts), h, rtol=0.0, atol=1e-9 * max(1.0, abs(ts[-1]))):
        raise ValueError(f"{path}: time column is not uniformly spaced")
    grid = TimeGrid(ts[0], ts[-1], h)
    values = np.column_stack([rows[name] for name in names[1:]])
    return names[1:], Trajectory(grid, values)
