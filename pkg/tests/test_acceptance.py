"""Release gates: nine end-to-end checks of the library against its
published reference scenario.  One summary line per check is printed in the
terminal summary (see conftest).

Numbered checks:
  1. metric arithmetic reproduces the reference-table percentage cells
  2. compartment totals are conserved by both base and controlled dynamics
  3. the integrator shows fourth-order endpoint self-convergence
  4. adjoint gradients agree with central finite differences
  5. the converged control minimizes the Hamiltonian pointwise over the box
  6. pinning the control box to (1, 0, 0) reproduces the base model
  7. the fitter recovers a known generating parameter vector
  8. the autumn-2020 case study is reproduced qualitatively
  9. the sweep solver converges on the case-study scenario
"""

import numpy as np
import pytest

from seirctl import (
    ControlBounds,
    ControlVec,
    ModelParams,
    PopulationConstant,
    TimeGrid,
    gradient_check,
    simulate,
    solve_fbsm,
)
from seirctl.control import hamiltonian
from seirctl.metrics import format_percent, improvement, relative_error

from conftest import ITALY_N, italy_initial_state
from reference_tables import INCONSISTENT_CELLS, iter_cells


def _recomputed(which, real, model):
    if which == "eta":
        return relative_error(real, model)
    return improvement(real, model).percent


def test_c1_metric_arithmetic():
    # Every percentage cell printed in the comparison tables must follow
    # from its own row's counts to within 0.01 percentage points.  Four
    # cells are internally inconsistent in the source and excluded here;
    # test_known_inconsistent_cells pins them down.
    checked = 0
    for series, month, day, which, real, model, printed in iter_cells():
        if (series, month, day, which) in INCONSISTENT_CELLS:
            continue
        value = _recomputed(which, real, model)
        assert abs(value - float(printed)) <= 0.01, (
            f"{series} {month} day {day} {which}: {value} vs printed {printed}"
        )
        checked += 1
    assert checked == 80

    # spot checks straight from the tables, character for character
    assert format_percent(relative_error(209610, 207996)) == "0.77"
    assert format_percent(improvement(209610, 236134).percent) == "12.65"
    assert format_percent(relative_error(38321, 37003)) == "3.43"
    assert format_percent(improvement(38321, 35498).percent) == "7.36"
    assert format_percent(relative_error(299191, 317055)) == "5.97"
    assert format_percent(improvement(299191, 107).percent) == "99.96"


@pytest.mark.xfail(
    strict=True,
    reason="four printed percentage cells contradict the counts in their own rows",
)
def test_known_inconsistent_cells():
    for series, month, day, which, real, model, printed in iter_cells():
        if (series, month, day, which) not in INCONSISTENT_CELLS:
            continue
        value = _recomputed(which, real, model)
        assert abs(value - float(printed)) <= 0.01


def test_c2_conservation(italy_params, sept1_state, n_italy, autumn_grid):
    # base dynamics and controlled dynamics with a bound-hugging constant
    # control; the seven compartments must sum to N at every node
    for controls in (None, (0.1, 1.0, 1.0)):
        traj = simulate(italy_params, sept1_state, n_italy, autumn_grid, controls)
        drift = np.abs(traj.values.sum(axis=1) - ITALY_N) / ITALY_N
        assert drift.max() <= 1e-9


def test_c3_integrator_order(italy_params, sept1_state, n_italy):
    # halving the step should cut the endpoint error about 16-fold
    vals = {}
    for h in (0.2, 0.1, 0.0125):
        traj = simulate(italy_params, sept1_state, n_italy, TimeGrid(0.0, 90.0, h))
        vals[h] = traj.values[-1]
    err_coarse = np.max(np.abs(vals[0.2] - vals[0.0125]))
    err_fine = np.max(np.abs(vals[0.1] - vals[0.0125]))
    assert 12.0 <= err_coarse / err_fine <= 20.0


def test_c4_adjoint_gradient(italy_params, unit_weights, italy_bounds, n_italy):
    # adjoint-based objective gradient vs central finite differences at 20
    # random interior probes of a constant interior control on a coarse
    # 10-day grid; the constant-population adjoint form is the exact
    # gradient of the implemented dynamics
    grid = TimeGrid(0.0, 10.0, 0.05)
    u = np.tile([0.55, 0.5, 0.5], (grid.n_nodes, 1))
    x0 = tuple(italy_initial_state())
    rng = np.random.default_rng(20260817)
    worst = 0.0
    for _ in range(20):
        node = int(rng.integers(1, grid.n_nodes - 1))
        comp = int(rng.integers(0, 3))
        ag, fd = gradient_check(
            italy_params, x0, unit_weights, italy_bounds, grid, u, comp, node,
            1e-4, n=n_italy, adjoint_form="constant_n",
        )
        worst = max(worst, abs(ag - fd) / max(abs(fd), 1e-300))
    assert worst <= 1e-3


def test_c5_pointwise_minimality(
    autumn_solution, italy_params, unit_weights, italy_bounds, autumn_grid, n_italy
):
    # at 100 sampled nodes the returned control must beat 1000 random
    # feasible controls in the Hamiltonian, up to solver tolerance
    sol = autumn_solution
    times = autumn_grid.nodes()
    rng = np.random.default_rng(2020)
    nodes = rng.choice(autumn_grid.n_nodes, size=100, replace=False)
    lo, hi = italy_bounds.lower, italy_bounds.upper
    for node in nodes:
        x = sol.states.values[node]
        psi = sol.adjoints.values[node]
        t = float(times[node])
        h_star = hamiltonian(
            x, sol.controls.values[node], psi, t, italy_params, unit_weights, n_italy
        )
        slack = 1e-8 * (1.0 + abs(h_star))
        candidates = rng.uniform(lo, hi, size=(1000, 3))
        for u in candidates:
            assert h_star <= hamiltonian(
                x, u, psi, t, italy_params, unit_weights, n_italy
            ) + slack


def test_c6_reduction_equivalence(
    italy_params, sept1_state, unit_weights, autumn_grid, n_italy
):
    # the controlled model with u pinned at (1, 0, 0) is the base model
    pinned = ControlBounds(ControlVec(1.0, 0.0, 0.0), ControlVec(1.0, 0.0, 0.0))
    sol = solve_fbsm(
        italy_params, sept1_state, unit_weights, pinned, autumn_grid, n=n_italy
    )
    base = simulate(italy_params, sept1_state, n_italy, autumn_grid)
    gap = np.abs(sol.states.values - base.values)
    assert np.all(gap <= 1e-12 * np.maximum(1.0, np.abs(base.values)))


def test_c7_synthetic_recovery():
    # generate noiseless Q/R/D observations from a known parameter vector,
    # perturb it by up to 20 percent, and demand the fit walk back
    import datetime as dt

    from seirctl.dataio import ObservedSeries
    from seirctl.fit import FitProblem, fit

    truth = np.array(
        [0.004, 1.2, 0.25, 0.35, 0.03, 0.15, 25.0, 0.002, 0.05, 30.0, 40000.0, 12000.0]
    )
    n = PopulationConstant(60_000_000.0)
    q0, r0, d0 = 26754.0, 207944.0, 35491.0
    days = 60
    dates = tuple(
        dt.date(2020, 9, 1) + dt.timedelta(days=i) for i in range(days + 1)
    )
    p_true = ModelParams.from_array(truth[:10])
    s0 = n.n - truth[10] - truth[11] - q0 - r0 - d0
    x0 = (s0, truth[10], truth[11], q0, r0, d0, 0.0)
    grid = TimeGrid(0.0, float(days), 0.1)
    traj = simulate(p_true, x0, n, grid)
    idx = (np.arange(days + 1) / grid.h).round().astype(int)
    obs = ObservedSeries(
        dates=dates, q=traj.values[idx, 3], r=traj.values[idx, 4], d=traj.values[idx, 5]
    )

    problem = FitProblem(observed=obs, n=n)
    rng = np.random.default_rng(7)
    guess = np.clip(
        truth * (1.0 + 0.2 * rng.uniform(-1, 1, size=12)),
        problem.lower,
        problem.upper,
    )
    result = fit(problem, guess)
    assert result.converged
    rel = np.abs(result.theta() - truth) / np.abs(truth)
    assert rel.max() <= 1e-3


def test_c8_case_study_reproduction(
    autumn_solution, italy_params, sept1_state, n_italy, autumn_grid
):
    # soft reproduction of the published October endpoints: the initial
    # exposed/infected split is reconstructed, not published, so only the
    # headline numbers are required to land nearby
    day58 = int(round(58.0 / autumn_grid.h))
    base = simulate(italy_params, sept1_state, n_italy, autumn_grid)
    d_oct29 = base.values[day58, 5]
    q_oct29 = base.values[day58, 3]
    assert abs(d_oct29 - 37003.0) / 37003.0 <= 0.05
    assert abs(q_oct29 - 317055.0) / 317055.0 <= 0.15

    # the controlled run all but empties the quarantined compartment
    q_controlled = float(autumn_solution.states.values[day58, 3])
    gain = improvement(299191.0, q_controlled)
    assert gain.direction == -1
    assert gain.percent >= 99.0

    # social-distancing control rests on its lower bound the whole horizon
    assert np.all(np.abs(autumn_solution.controls.values[:, 0] - 0.1) <= 1e-6)


def test_c9_fbsm_convergence(autumn_solution):
    assert autumn_solution.converged
    assert autumn_solution.iterations <= 500
