"""Shared fixtures: the Italy autumn-2020 scenario and the regional fixture feed."""

import datetime as dt
import os
import re

import numpy as np
import pytest

from seirctl.control import CostWeights, FbsmOptions, solve_fbsm
from seirctl.dataio import aggregate_national, parse_regional_csv
from seirctl.fit import FitOptions, FitProblem, fit
from seirctl.integrate import TimeGrid
from seirctl.model import ControlBounds, ControlVec, ModelParams, PopulationConstant, StateVec

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURE_CSV = os.path.join(HERE, "data", "regional_fixture.csv")

# Calibrated scenario constants (see the preset of the same name).
ITALY_N = 60_461_826.0
ITALY_PARAM_VALUES = {
    "alpha": 1.1775e-7,
    "beta": 3.97,
    "gamma": 0.0048,
    "delta": 0.1432,
    "lam1": 0.0181,
    "lam2": 0.8111,
    "lam3": 6.9882,
    "kap1": 0.00062,
    "kap2": 0.0233,
    "kap3": 54.0351,
}
SEPT1 = dt.date(2020, 9, 1)
Q0, R0, D0 = 26_754.0, 207_944.0, 35_491.0
E0, I0 = 53_311.0, 4_677.0
P0 = 0.0

FIT_GUESS = np.array(
    [0.06, 1.0, 5.0, 0.5, 0.01, 0.1, 10.0, 0.001, 0.001, 10.0, 50_000.0, 5_000.0]
)


def italy_initial_state() -> StateVec:
    s0 = ITALY_N - E0 - I0 - Q0 - R0 - D0 - P0
    return StateVec(s0, E0, I0, Q0, R0, D0, P0)


@pytest.fixture(autouse=True)
def _clean_seirctl_env(monkeypatch):
    # Stray SEIRCTL_* variables would silently override test configurations.
    for key in list(os.environ):
        if key.startswith("SEIRCTL_"):
            monkeypatch.delenv(key)


@pytest.fixture(scope="session")
def italy_params() -> ModelParams:
    return ModelParams(**ITALY_PARAM_VALUES)


@pytest.fixture(scope="session")
def n_italy() -> PopulationConstant:
    return PopulationConstant(ITALY_N)


@pytest.fixture(scope="session")
def sept1_state() -> StateVec:
    return italy_initial_state()


@pytest.fixture(scope="session")
def italy_bounds() -> ControlBounds:
    return ControlBounds(ControlVec(0.1, 0.0, 0.0), ControlVec(1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def unit_weights() -> CostWeights:
    return CostWeights()


@pytest.fixture(scope="session")
def autumn_grid() -> TimeGrid:
    # Sept 1 through Nov 30: 91 days.
    return TimeGrid(0.0, 91.0, 0.1)


@pytest.fixture(scope="session")
def fixture_records():
    return parse_regional_csv(FIXTURE_CSV)


@pytest.fixture(scope="session")
def observed_sept_oct(fixture_records):
    return aggregate_national(
        fixture_records, (dt.date(2020, 9, 1), dt.date(2020, 10, 31))
    )


@pytest.fixture(scope="session")
def autumn_solution(italy_params, sept1_state, unit_weights, italy_bounds, autumn_grid, n_italy):
    """Converged extremal of the full-scenario control problem (solved once)."""
    sol = solve_fbsm(
        italy_params,
        sept1_state,
        unit_weights,
        italy_bounds,
        autumn_grid,
        FbsmOptions(),
        n_italy,
    )
    return sol


@pytest.fixture(scope="session")
def fixture_fit(observed_sept_oct, n_italy):
    """Full calibration of the fixture series from the documented guess."""
    problem = FitProblem(observed=observed_sept_oct, n=n_italy)
    return problem, fit(problem, FIT_GUESS, FitOptions())


_ACCEPTANCE_RE = re.compile(r"test_acceptance\.py::test_(c\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, derived from real outcomes."""
    results = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, ()):
            m = _ACCEPTANCE_RE.search(getattr(report, "nodeid", ""))
            if m:
                cid, slug = m.group(1).upper(), m.group(2).replace("_", " ")
                results[(int(cid[1:]), cid, slug)] = label
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for (_, cid, slug), label in sorted(results.items()):
        terminalreporter.write_line(f"{cid} {slug}: {label}")
