"""Tests for the two-site closed forms and the engine cross-check."""

import numpy as np
import pytest

from qthermo_mcp.boundary_driven.densemat import random_density_matrix
from qthermo_mcp.boundary_driven.lindblad_engine import build_model, initial_state, lindblad_rhs, ness
from qthermo_mcp.boundary_driven.models import CorrelatorState, TwoSiteParams
from qthermo_mcp.boundary_driven.thermo import thermo_record
from qthermo_mcp.boundary_driven.twosite_oracle import (
    OBSERVABLES,
    correlator_rhs,
    correlators_from_state,
    integrate_correlators,
    ness_closed_form,
    ness_correlators,
    oracle_vs_engine,
    second_law_grid,
)


@pytest.fixture
def hot_cold():
    """beta_L = 0.5, beta_R = 2 with unit fields, coupling and rate."""
    return TwoSiteParams(J=1.0, h_L=1.0, h_R=1.0, lam=1.0, beta_L=0.5, beta_R=2.0)


@pytest.fixture
def detuned():
    """Unequal fields so that work is exchanged."""
    return TwoSiteParams(J=0.8, h_L=2.0, h_R=1.2, lam=0.6, beta_L=0.4, beta_R=1.5)


class TestClosedForm:
    """Test cases for ness_closed_form."""

    def test_reference_values(self, hot_cold):
        """M_R = -tanh(1) fixes j_s = (M_R - M_L) / 2."""
        closed = ness_closed_form(hot_cold)
        assert closed.j_s == pytest.approx(-0.2583377467760279, abs=1e-12)
        assert closed.Qdot_L == pytest.approx(0.2583377467760279, abs=1e-12)
        assert closed.Qdot_R == pytest.approx(-0.2583377467760279, abs=1e-12)
        assert closed.Wdot == 0.0
        assert closed.diS_dt == pytest.approx(0.38750662016404185, abs=1e-12)

    def test_equal_inverse_temperatures_of_one(self):
        """beta_R = 1 gives j_s = (tanh(1/4) - tanh(1/2)) / 2."""
        closed = ness_closed_form(TwoSiteParams(beta_L=0.5, beta_R=1.0))
        assert closed.j_s == pytest.approx(-0.1085992474281503, abs=1e-12)
        assert closed.diS_dt == pytest.approx(0.05429962371407515, abs=1e-12)

    def test_engine_matches(self, hot_cold, detuned):
        """The Liouvillian steady state reproduces the closed forms to 1e-8."""
        for params in (hot_cold, detuned):
            model = build_model(params.chain(), params.baths())
            record = thermo_record(model, ness(model).rho)
            closed = ness_closed_form(params)
            assert record.j_s == pytest.approx(closed.j_s, abs=1e-8)
            assert record.Wdot == pytest.approx(closed.Wdot, abs=1e-8)
            assert record.Qdot_L == pytest.approx(closed.Qdot_L, abs=1e-8)
            assert record.Qdot_R == pytest.approx(closed.Qdot_R, abs=1e-8)
            assert record.diS_dt == pytest.approx(closed.diS_dt, abs=1e-8)

    def test_stationary(self, hot_cold, detuned):
        """The closed-form correlators are a fixed point of the ODEs."""
        for params in (hot_cold, detuned):
            rates = correlator_rhs(ness_correlators(params), params).as_array()
            assert np.max(np.abs(rates)) < 1e-14

    def test_engine_correlators(self, detuned):
        """NESS correlators from the engine agree with the closed form."""
        model = build_model(detuned.chain(), detuned.baths())
        engine = correlators_from_state(ness(model).rho).as_array()
        assert np.allclose(engine, ness_correlators(detuned).as_array(), atol=1e-9)


class TestCorrelatorDynamics:
    """Test cases for the correlator ODEs."""

    def test_mixed_state_correlators(self):
        """I/4 has all four correlators equal to zero."""
        assert np.allclose(correlators_from_state(initial_state(2, "mixed")).as_array(), 0)

    def test_rhs_matches_lindblad_generator(self, detuned):
        """d<O>/dt = Tr(O rhs(rho)) for each correlator and random states."""
        rng = np.random.default_rng(17)
        model = build_model(detuned.chain(), detuned.baths())
        for _ in range(10):
            rho = random_density_matrix(4, rng)
            expected = [float(np.trace(op @ lindblad_rhs(model, rho)).real) for op in OBSERVABLES.values()]
            predicted = correlator_rhs(correlators_from_state(rho), detuned).as_array()
            assert np.allclose(predicted, expected, atol=1e-12)

    def test_decoupled_sites_relax_at_four_lambda(self):
        """With J = 0 each z relaxes to its bath magnetization at rate 4 lambda."""
        params = TwoSiteParams(J=0.0, h_L=1.5, h_R=0.7, lam=0.3, beta_L=0.6, beta_R=1.8)
        s0 = CorrelatorState(X=0.0, y=0.0, z1=1.0, z2=-1.0)
        times, states = integrate_correlators(params, s0, 2.0, samples=5)
        for t, s in zip(times, states):
            decay = np.exp(-4 * params.lam * t)
            assert s.z1 == pytest.approx(params.M_L + (1.0 - params.M_L) * decay, abs=1e-9)
            assert s.z2 == pytest.approx(params.M_R + (-1.0 - params.M_R) * decay, abs=1e-9)
            assert s.X == pytest.approx(0.0, abs=1e-15)
            assert s.y == pytest.approx(0.0, abs=1e-15)

    def test_relaxes_to_ness(self, detuned):
        """Long integration lands on the stationary correlators."""
        s0 = CorrelatorState(X=0.0, y=0.0, z1=1.0, z2=1.0)
        times, states = integrate_correlators(detuned, s0, 20.0, samples=11)
        assert len(times) == 11
        assert times[-1] == pytest.approx(20.0)
        assert np.allclose(states[-1].as_array(), ness_correlators(detuned).as_array(), atol=1e-6)


class TestOracleVsEngine:
    """Test cases for oracle_vs_engine."""

    def test_passes_from_polarized_state(self, hot_cold):
        """Transient and steady-state comparisons both pass."""
        report = oracle_vs_engine(hot_cold, initial_state(2, "up"), t_final=10.0, samples=51)
        assert report.passed, report.error
        assert len(report.rows) == 51
        assert report.max_deviation < 1e-6
        assert report.work_symmetry_error < 1e-8
        assert set(report.rows[0]) >= {"t", "X", "Y", "z1", "z2", "X_engine", "max_dev"}

    def test_tolerance_failure_reported(self, detuned):
        """An impossible tolerance is reported instead of raised."""
        report = oracle_vs_engine(detuned, initial_state(2, "up"), t_final=2.0, samples=11, tol_transient=-1.0)
        assert not report.passed
        assert "transient deviation" in report.error


class TestSecondLawGrid:
    """Test cases for second_law_grid."""

    def test_closed_form_grid(self):
        """d_iS/dt >= 0 everywhere and vanishes on beta_L h_L = beta_R h_R."""
        values = [0.5, 1.0, 1.5, 2.0, 3.0]
        rows = second_law_grid(values, values)
        assert len(rows) == 625
        assert all(row["diS_dt"] >= 0 for row in rows)
        for row in rows:
            if row["beta_L"] * row["h_L"] == row["beta_R"] * row["h_R"]:
                assert row["diS_dt"] == pytest.approx(0.0, abs=1e-15)

    def test_engine_grid_agrees(self):
        """The Liouvillian route gives the same values."""
        closed = second_law_grid([0.5, 2.0], [1.0, 2.0])
        engine = second_law_grid([0.5, 2.0], [1.0, 2.0], use_engine=True)
        for a, b in zip(closed, engine):
            assert b["diS_dt"] == pytest.approx(a["diS_dt"], abs=1e-8)
