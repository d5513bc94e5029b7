"""Domain types, time-varying rates, and right-hand sides."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seirctl.errors import InvalidStateError
from seirctl.integrate import TimeGrid
from seirctl.model import (
    UNCONTROLLED,
    ControlBounds,
    ControlVec,
    ModelParams,
    PopulationConstant,
    StateVec,
    check_nonnegative,
    mortality_rate,
    recovery_rate,
    rhs_controlled,
    rhs_uncontrolled,
    simulate,
    total_population,
)

from conftest import ITALY_N, italy_initial_state


def rates_oracle(t, p):
    """Second, independently coded evaluation of the two time-varying rates."""
    lam = p.lam1 / (1.0 + math.exp(-p.lam2 * (t - p.lam3)))
    a = p.kap2 * (t - p.kap3)
    kap = p.kap1 / (math.exp(a) + math.exp(-a))
    return lam, kap


def rhs_oracle(t, x, u, p, n):
    """Matrix-form transcription of the controlled dynamics (flow matrix A
    plus the bilinear infection term), arranged differently from the library
    code on purpose."""
    lam, kap = rates_oracle(t, p)
    A = np.zeros((7, 7))
    A[0, 0] = -(p.alpha + u[1])
    A[6, 0] = p.alpha + u[1]
    A[1, 1] = -p.gamma
    A[2, 1] = p.gamma
    A[2, 2] = -p.delta
    A[3, 2] = p.delta
    A[3, 3] = -(lam + u[2] + kap)
    A[4, 3] = lam + u[2]
    A[5, 3] = kap
    f = A @ np.asarray(x, dtype=float)
    infection = p.beta * u[0] * x[0] * x[2] / n
    f[0] -= infection
    f[1] += infection
    return f


class TestRates:
    def test_recovery_midpoint_is_half_lam1(self, italy_params):
        # exp(0) = 1 exactly, so the sigmoid midpoint is exact
        assert recovery_rate(italy_params.lam3, italy_params) == italy_params.lam1 / 2
        assert recovery_rate(6.9882, italy_params) == 0.00905

    def test_recovery_reference_value(self, italy_params):
        # frozen high-precision evaluation of the logistic formula at t = 30
        assert recovery_rate(30.0, italy_params) == pytest.approx(
            0.018099999858215716, rel=1e-14
        )

    def test_mortality_peak_is_half_kap1(self, italy_params):
        assert mortality_rate(italy_params.kap3, italy_params) == italy_params.kap1 / 2

    def test_mortality_reference_value(self, italy_params):
        # frozen high-precision evaluation of the bell formula at t = 0
        assert mortality_rate(0.0, italy_params) == pytest.approx(
            0.00016290524654042187, rel=1e-14
        )

    @given(s=st.floats(min_value=0.0, max_value=200.0, allow_nan=False))
    def test_mortality_symmetric_about_center(self, s):
        p = ModelParams(0.1, 1.0, 0.1, 0.1, 0.0181, 0.8111, 6.9882, 0.00062, 0.0233, 54.0351)
        # even in (t - kap3); rounding of the two offsets allows 1-ulp slack
        assert mortality_rate(p.kap3 + s, p) == pytest.approx(
            mortality_rate(p.kap3 - s, p), rel=1e-12
        )

    @given(t=st.floats(min_value=-500.0, max_value=500.0, allow_nan=False))
    def test_rate_bounds(self, t):
        p = ModelParams(0.1, 1.0, 0.1, 0.1, 0.0181, 0.8111, 6.9882, 0.00062, 0.0233, 54.0351)
        # upper bounds saturate in floating point once the exponentials underflow
        assert 0.0 < recovery_rate(t, p) <= p.lam1
        assert 0.0 < mortality_rate(t, p) <= p.kap1 / 2
        if t <= p.lam3 + 40.0:
            assert recovery_rate(t, p) < p.lam1

    def test_rates_stay_finite_far_from_center(self, italy_params):
        # exponent clamping keeps extreme arguments from overflowing
        for t in (-1e6, 1e6):
            assert math.isfinite(recovery_rate(t, italy_params))
            assert math.isfinite(mortality_rate(t, italy_params))

    def test_rates_match_plain_transcription(self, italy_params):
        for t in (0.0, 6.9882, 30.0, 54.0351, 91.0):
            lam, kap = rates_oracle(t, italy_params)
            assert recovery_rate(t, italy_params) == pytest.approx(lam, rel=1e-14)
            assert mortality_rate(t, italy_params) == pytest.approx(kap, rel=1e-14)


class TestParams:
    def test_negative_parameter_rejected(self):
        with pytest.raises(ValueError, match="beta"):
            ModelParams(0.1, -1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1)

    def test_array_round_trip(self, italy_params):
        again = ModelParams.from_array(italy_params.as_array())
        assert again == italy_params

    def test_from_array_wrong_length(self):
        with pytest.raises(ValueError, match="10 parameters"):
            ModelParams.from_array(np.ones(9))


class TestBounds:
    def test_reversed_bounds_rejected(self):
        with pytest.raises(ValueError, match="u2"):
            ControlBounds(ControlVec(0.1, 0.7, 0.0), ControlVec(1.0, 0.3, 1.0))

    def test_clip_and_contains(self):
        b = ControlBounds(ControlVec(0.1, 0.0, 0.0), ControlVec(1.0, 1.0, 1.0))
        assert b.clip((5.0, -2.0, 0.5)) == ControlVec(1.0, 0.0, 0.5)
        assert b.contains((0.1, 0.0, 1.0))
        assert not b.contains((0.0, 0.0, 0.5))
        assert b.midpoint() == ControlVec(0.55, 0.5, 0.5)


class TestPopulation:
    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            PopulationConstant(0.0)

    def test_from_state_matches_sum(self, sept1_state):
        assert PopulationConstant.from_state(sept1_state).n == ITALY_N

    def test_total_population_examples(self):
        assert total_population((1, 1, 1, 1, 1, 1, 1)) == 7
        assert total_population(np.zeros(7)) == 0
        # integer-valued doubles: the reconstruction sums back exactly
        assert total_population(italy_initial_state()) == ITALY_N


class TestRhs:
    def test_all_protected_state_is_stationary(self, italy_params, n_italy):
        x = StateVec(0, 0, 0, 0, 0, 0, n_italy.n)
        assert rhs_uncontrolled(5.0, x, italy_params, n_italy) == (0,) * 7

    def test_component_sum_vanishes(self, italy_params, n_italy, sept1_state):
        f = rhs_uncontrolled(3.7, sept1_state, italy_params, n_italy)
        largest = max(abs(v) for v in f)
        assert abs(sum(f)) <= 1e-12 * largest

    def test_matches_independent_transcription(self, italy_params, n_italy, sept1_state):
        f = rhs_uncontrolled(0.0, sept1_state, italy_params, n_italy)
        ref = rhs_oracle(0.0, sept1_state, UNCONTROLLED, italy_params, n_italy.n)
        np.testing.assert_allclose(np.asarray(f), ref, rtol=1e-12, atol=0.0)

    def test_controlled_matches_independent_transcription(
        self, italy_params, n_italy, sept1_state
    ):
        u = ControlVec(0.1, 1.0, 1.0)
        f = rhs_controlled(0.0, sept1_state, u, italy_params, n_italy)
        ref = rhs_oracle(0.0, sept1_state, u, italy_params, n_italy.n)
        np.testing.assert_allclose(np.asarray(f), ref, rtol=1e-12, atol=0.0)

    def test_unit_control_reduces_exactly(self, italy_params, n_italy, sept1_state):
        # u = (1, 0, 0) must be bitwise identical to the base model: one code path
        a = rhs_controlled(2.5, sept1_state, (1.0, 0.0, 0.0), italy_params, n_italy)
        b = rhs_uncontrolled(2.5, sept1_state, italy_params, n_italy)
        assert a == b

    @given(
        u1=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        u2=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        u3=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        t=st.floats(min_value=0.0, max_value=91.0, allow_nan=False),
    )
    @settings(max_examples=50)
    def test_controlled_sum_vanishes_for_any_control(self, u1, u2, u3, t):
        p = ModelParams(**{
            k: v for k, v in zip(
                ("alpha", "beta", "gamma", "delta", "lam1", "lam2", "lam3",
                 "kap1", "kap2", "kap3"),
                (1.1775e-7, 3.97, 0.0048, 0.1432, 0.0181, 0.8111, 6.9882,
                 0.00062, 0.0233, 54.0351),
            )
        })
        n = PopulationConstant(ITALY_N)
        x = italy_initial_state()
        f = rhs_controlled(t, x, (u1, u2, u3), p, n)
        largest = max(abs(v) for v in f) or 1.0
        assert abs(sum(f)) <= 1e-12 * largest

    def test_zero_u1_stops_new_exposures(self, italy_params, n_italy):
        # with no exposed stock the E derivative is exactly zero when u1 = 0
        x = StateVec(6e7, 0.0, 1e4, 1e3, 0.0, 0.0, 0.0)
        f = rhs_controlled(1.0, x, (0.0, 0.0, 0.0), italy_params, n_italy)
        assert f.E == 0.0


class TestSimulate:
    def test_conservation_over_window(self, italy_params, sept1_state, n_italy, autumn_grid):
        traj = simulate(italy_params, sept1_state, n_italy, autumn_grid)
        totals = traj.values.sum(axis=1)
        assert np.max(np.abs(totals - n_italy.n)) / n_italy.n <= 1e-9

    def test_dead_and_protected_monotone(self, italy_params, sept1_state, n_italy, autumn_grid):
        traj = simulate(italy_params, sept1_state, n_italy, autumn_grid)
        assert np.all(np.diff(traj.values[:, 5]) >= 0.0)
        assert np.all(np.diff(traj.values[:, 6]) >= 0.0)

    def test_constant_control_accepted(self, italy_params, sept1_state, n_italy):
        grid = TimeGrid(0.0, 5.0, 0.1)
        traj = simulate(italy_params, sept1_state, n_italy, grid, controls=(0.5, 0.2, 0.1))
        assert traj.values.shape == (grid.n_nodes, 7)

    def test_wrong_control_shape_rejected(self, italy_params, sept1_state, n_italy):
        grid = TimeGrid(0.0, 5.0, 0.1)
        with pytest.raises(ValueError, match="shape"):
            simulate(italy_params, sept1_state, n_italy, grid, controls=np.ones((7, 3)))

    def test_determinism(self, italy_params, sept1_state, n_italy):
        grid = TimeGrid(0.0, 10.0, 0.1)
        a = simulate(italy_params, sept1_state, n_italy, grid)
        b = simulate(italy_params, sept1_state, n_italy, grid)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.derivs, b.derivs)


class TestNonnegativeCheck:
    def test_undershoot_within_tolerance_passes(self, n_italy):
        grid = TimeGrid(0.0, 1.0, 0.5)
        states = np.zeros((3, 7))
        states[1, 2] = -1e-10 * n_italy.n
        check_nonnegative(states, n_italy, grid)

    def test_violation_reports_compartment_and_time(self, n_italy):
        grid = TimeGrid(0.0, 1.0, 0.5)
        states = np.zeros((3, 7))
        states[2, 3] = -1e-6 * n_italy.n
        with pytest.raises(InvalidStateError, match=r"Q .* t = 1\.0"):
            check_nonnegative(states, n_italy, grid)
