"""Least-squares calibration of model parameters to observed Q, R, D series.

Twelve quantities are fitted jointly: the ten flow-rate parameters plus the
unobserved initial exposed and infectious counts E0, I0.  Strictly positive
rate parameters are optimized in log space (their magnitudes span seven
orders); the two time-center parameters and E0, I0 stay linear.  The driver
is a damped Gauss-Newton (Levenberg-Marquardt) iteration with a
forward-difference Jacobian and projection onto box bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import ObservedSeries
from .errors import InvalidStateError, NonFiniteStateError
from .integrate import TimeGrid
from .model import ModelParams, PopulationConstant, StateVec, simulate

VAR_NAMES = (
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
    "e0",
    "i0",
)

# Indices optimized as log(theta); the rest are linear.
LOG_VARS = (0, 1, 2, 3, 4, 5, 7, 8)

DEFAULT_LOWER = np.array(
    [1e-12, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 0.0, 1e-8, 1e-6, 0.0, 0.0, 0.0]
)
DEFAULT_UPPER = np.array(
    [1.0, 20.0, 10.0, 5.0, 1.0, 5.0, 120.0, 1.0, 5.0, 180.0, 5e6, 5e6]
)


@dataclass(frozen=True)
class FitProblem:
    """Observed series plus everything held fixed during calibration.

    Q0, R0, D0 come from the first observation; N and P0 are configuration.
    The model is integrated at step h over the observation span, with t = 0
    at the first observation date.
    """

    observed: ObservedSeries
    n: PopulationConstant
    p0: float = 0.0
    h: float = 0.1
    lower: np.ndarray = field(default_factory=lambda: DEFAULT_LOWER.copy())
    upper: np.ndarray = field(default_factory=lambda: DEFAULT_UPPER.copy())

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (12,) or hi.shape != (12,):
            raise ValueError("bounds must have one entry per fitted variable (12)")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            bad = [VAR_NAMES[i] for i in np.nonzero(lo > hi)[0]]
            raise ValueError(f"lower bound exceeds upper for {bad}")
        if np.any(lo[list(LOG_VARS)] <= 0.0):
            bad = [VAR_NAMES[i] for i in LOG_VARS if lo[i] <= 0.0]
            raise ValueError(f"log-space variables need positive lower bounds: {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(self.observed) < 2:
            raise ValueError("need at least two observations")
        offsets = self.observed.day_offsets()
        if np.any(np.abs(offsets / self.h - np.rint(offsets / self.h)) > 1e-9):
            raise ValueError("observation dates must land on the integration grid")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, float(self.observed.day_offsets()[-1]), self.h)

    def initial_state(self, theta) -> StateVec:
        e0 = float(theta[10])
        i0 = float(theta[11])
        q0 = float(self.observed.q[0])
        r0 = float(self.observed.r[0])
        d0 = float(self.observed.d[0])
        s0 = self.n.n - e0 - i0 - q0 - r0 - d0 - self.p0
        if s0 < 0.0:
            raise InvalidStateError(f"initial susceptibles negative: {s0}")
        return StateVec(s0, e0, i0, q0, r0, d0, self.p0)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a calibration run."""

    params: ModelParams
    e0: float
    i0: float
    residual_norm: float
    iterations: int
    converged: bool
    message: str
    rmse: dict

    def theta(self) -> np.ndarray:
        return np.concatenate([self.params.as_array(), [self.e0, self.i0]])

    def to_dict(self) -> dict:
        out = {name: float(v) for name, v in zip(VAR_NAMES, self.theta())}
        out["residual_norm"] = self.residual_norm
        out["iterations"] = self.iterations
        out["converged"] = self.converged
        out["message"] = self.message
        for key, val in self.rmse.items():
            out[f"rmse_{key}"] = val
        return out

    def to_key_value_text(self) -> str:
        lines = []
        for key, val in self.to_dict().items():
            if isinstance(val, bool):
                lines.append(f"{key} = {'true' if val else 'false'}")
            elif isinstance(val, float):
                lines.append(f"{key} = {val!r}")
            else:
                lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FitOptions:
    """Levenberg-Marquardt settings.

    cost_tol ends the iteration once an acceptable step would shrink the
    sum of squares by less than cost_tol relative (both observed and
    predicted by the local quadratic model).  On observed data the
    finite-difference gradient carries a truncation-noise floor far above
    grad_tol, so cost_tol is what normally terminates a successful
    calibration; the sub-threshold trial step is discarded, which makes a
    converged result an exact fixed point of refitting.
    """

    max_iter: int = 200
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    cost_tol: float = 1e-6
    damping: float = 1e-3
    damping_max: float = 1e12
    fd_step: float = 1e-6


def _sample_indices(problem: FitProblem) -> np.ndarray:
    return np.rint(problem.observed.day_offsets() / problem.h).astype(int)


def residuals(theta, problem: FitProblem) -> np.ndarray:
    """Scaled model-minus-observed residuals, series-concatenated (Q, R, D).

    Each series is scaled by 1/max(observed) so the three weigh comparably.
    Non-finite trajectories propagate as exceptions; the fit driver treats
    them as a rejected trial point.
    """
    theta = np.asarray(theta, dtype=float)
    p = ModelParams.from_array(theta[:10])
    x0 = problem.initial_state(theta)
    # No nonnegativity enforcement here: exploratory parameter vectors may
    # transiently undershoot; finiteness is still checked by the integrator.
    traj = simulate(p, x0, problem.n, problem.grid, nonneg_check=False)
    idx = _sample_indices(problem)
    obs = problem.observed
    out = []
    for col, series in ((3, obs.q), (4, obs.r), (5, obs.d)):
        scale = 1.0 / float(np.max(series))
        out.append((traj.values[idx, col] - series) * scale)
    res = np.concatenate(out)
    if not np.all(np.isfinite(res)):
        raise NonFiniteStateError(problem.grid.tf, "residual evaluation")
    return res


def _model_series_rmse(theta, problem: FitProblem) -> dict:
    theta = np.asarray(theta, dtype=float)
    p = ModelParams.from_array(theta[:10])
    traj = simulate(p, problem.initial_state(theta), problem.n, problem.grid, nonneg_check=False)
    idx = _sample_indices(problem)
    obs = problem.observed
    out = {}
    for key, col, series in (("Q", 3, obs.q), ("R", 4, obs.r), ("D", 5, obs.d)):
        diff = traj.values[idx, col] - series
        out[key] = float(np.sqrt(np.mean(diff * diff)))
    return out


def _encode(theta: np.ndarray) -> np.ndarray:
    z = np.array(theta, dtype=float)
    for i in LOG_VARS:
        z[i] = math.log(z[i])
    return z


def _decode(z: np.ndarray) -> np.ndarray:
    theta = np.array(z, dtype=float)
    for i in LOG_VARS:
        theta[i] = math.exp(theta[i])
    return theta


def _eval(z: np.ndarray, problem: FitProblem):
    """Residual vector and half sum of squares at internal coordinates z."""
    r = residuals(_decode(z), problem)
    return r, float(r @ r)


def fit(problem: FitProblem, guess, opts: FitOptions | None = None) -> FitResult:
    """Box-projected Levenberg-Marquardt calibration from the given guess.

    Terminates when the gradient uniform norm falls below grad_tol, an
    accepted step is shorter than step_tol, or max_iter iterations pass.
    A stall (damping exhausted without an acceptable step) reports
    converged=False with a diagnostic message.
    """
    if opts is None:
        opts = FitOptions()
    guess = np.asarray(guess, dtype=float)
    if guess.shape != (12,):
        raise ValueError(f"expected 12 starting values, got {guess.shape}")
    if np.any(guess < problem.lower) or np.any(guess > problem.upper):
        bad = [
            VAR_NAMES[i]
            for i in range(12)
            if not (problem.lower[i] <= guess[i] <= problem.upper[i])
        ]
        raise ValueError(f"starting guess outside bounds for {bad}")

    zlo = _encode(problem.lower)
    zhi = _encode(problem.upper)
    z = _encode(guess)
    r, cost = _eval(z, problem)
    mu = opts.damping
    converged = False
    message = "iteration limit reached"
    iterations = 0

    for it in range(1, opts.max_iter + 1):
        iterations = it
        jac = np.empty((r.size, 12))
        for j in range(12):
            dz = opts.fd_step * max(1.0, abs(z[j]))
            if z[j] + dz > zhi[j]:
                dz = -dz
            zj = z.copy()
            zj[j] = min(max(zj[j] + dz, zlo[j]), zhi[j])
            step = zj[j] - z[j]
            if step == 0.0:
                jac[:, j] = 0.0
                continue
            try:
                rj = residuals(_decode(zj), problem)
                jac[:, j] = (rj - r) / step
            except (NonFiniteStateError, InvalidStateError):
                jac[:, j] = 0.0

        grad = jac.T @ r
        # KKT test: at an active bound only the inward gradient component
        # counts, otherwise pinned variables block convergence forever.
        pgrad = grad.copy()
        tiny = 1e-12 * np.maximum(1.0, np.abs(z))
        at_lo = z <= zlo + tiny
        at_hi = z >= zhi - tiny
        pgrad[at_lo] = np.minimum(pgrad[at_lo], 0.0)
        pgrad[at_hi] = np.maximum(pgrad[at_hi], 0.0)
        if float(np.max(np.abs(pgrad))) <= opts.grad_tol:
            converged = True
            message = "gradient below tolerance"
            break

        jtj = jac.T @ jac
        diag = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        while mu <= opts.damping_max:
            try:
                step = np.linalg.solve(jtj + mu * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jtj + mu * np.diag(diag), -grad, rcond=None)[0]
            z_trial = np.minimum(np.maximum(z + step, zlo), zhi)
            d = z_trial - z
            predicted = float(0.5 * (d @ (mu * diag * d) - d @ grad))
            try:
                r_trial, cost_trial = _eval(z_trial, problem)
            except (NonFiniteStateError, InvalidStateError):
                cost_trial = math.inf
            if cost_trial < cost:
                gain = cost - cost_trial
                if gain <= opts.cost_tol * cost and predicted <= opts.cost_tol * cost:
                    # Below resolution both in fact and in the model:
                    # stop here and keep z, so refitting cannot drift.
                    converged = True
                    message = "cost reduction below tolerance"
                    accepted = True
                    break
                step_norm = float(np.max(np.abs(d)))
                z, r, cost = z_trial, r_trial, cost_trial
                mu = max(mu / 10.0, 1e-12)
                accepted = True
                if step_norm <= opts.step_tol:
                    converged = True
                    message = "step below tolerance"
                break
            mu *= 10.0
        if not accepted:
            message = f"stalled: no acceptable step at damping {mu:.1e}"
            break
        if converged:
            break

    theta = _decode(z)
    return FitResult(
        params=ModelParams.from_array(theta[:10]),
        e0=float(theta[10]),
        i0=float(theta[11]),
        residual_norm=float(np.sqrt(cost)),
        iterations=iterations,
        converged=converged,
        message=message,
        rmse=_model_series_rmse(theta, problem),
    )
