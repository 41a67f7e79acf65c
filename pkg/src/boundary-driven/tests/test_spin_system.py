"""Tests for spin operators, chain Hamiltonians and thermal spins."""

import math

import numpy as np
import pytest

from qthermo_mcp.boundary_driven.densemat import frobenius_norm, partial_trace, random_density_matrix
from qthermo_mcp.boundary_driven.errors import StructuralError
from qthermo_mcp.boundary_driven.models import BathSpec, ChainSpec
from qthermo_mcp.boundary_driven.spin_system import (
    IDENTITY_2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    basis_state,
    bath_hamiltonian,
    boundary_coupling,
    chain_hamiltonian,
    conserved_magnetization,
    joint_space,
    product_thermal_state,
    site_op,
    system_space,
    thermal_spin,
)


class TestSiteOperators:
    """Test cases for site_op and ladder algebra."""

    def test_embedding(self):
        """sz on site 1 of two spins is diag(1, 1, -1, -1)."""
        assert np.allclose(site_op(system_space(2), 1, "z"), np.diag([1, 1, -1, -1]))

    def test_ladder_anticommutator(self):
        """s+ s- + s- s+ = I."""
        assert np.allclose(SIGMA_PLUS @ SIGMA_MINUS + SIGMA_MINUS @ SIGMA_PLUS, IDENTITY_2)

    def test_ladder_commutators(self):
        """[sz, s±] = ±2 s±."""
        assert np.allclose(SIGMA_Z @ SIGMA_PLUS - SIGMA_PLUS @ SIGMA_Z, 2 * SIGMA_PLUS)
        assert np.allclose(SIGMA_Z @ SIGMA_MINUS - SIGMA_MINUS @ SIGMA_Z, -2 * SIGMA_MINUS)

    def test_raising_maps_down_to_up(self):
        """s+ = |0><1| with |0> the sz = +1 state."""
        assert np.allclose(SIGMA_PLUS, [[0, 1], [0, 0]])

    def test_site_out_of_range(self):
        """Unknown sites are structural errors."""
        with pytest.raises(StructuralError):
            site_op(system_space(2), 3, "x")

    def test_joint_space_order(self):
        """Copies sit outside the chain sites."""
        assert joint_space(3, ["R", "L"]).labels == ("L", "1", "2", "3", "R")
        assert joint_space(2, ["R"]).labels == ("1", "2", "R")


class TestChainHamiltonian:
    """Test cases for chain_hamiltonian."""

    def test_single_site(self):
        """N=1 gives sz/2."""
        assert np.allclose(chain_hamiltonian(ChainSpec(N=1, h=(1.0,))), SIGMA_Z / 2)

    @pytest.mark.parametrize("J", [0.5, 1.0, 3.0])
    def test_two_site_xx_spectrum(self, J):
        """Zero field XX dimer has spectrum (-2J, 0, 0, 2J)."""
        h_s = chain_hamiltonian(ChainSpec(N=2, h=(0.0, 0.0), J_x=J, J_y=J))
        assert np.allclose(np.linalg.eigvalsh(h_s), [-2 * J, 0, 0, 2 * J])

    def test_hermitian_for_random_specs(self):
        """H_S is Hermitian for arbitrary fields and couplings."""
        rng = np.random.default_rng(7)
        for n in (2, 3, 4):
            spec = ChainSpec(N=n, h=tuple(rng.normal(size=n)), J_x=float(rng.normal()), J_y=float(rng.normal()))
            h_s = chain_hamiltonian(spec)
            assert frobenius_norm(h_s - h_s.conj().T) < 1e-14

    def test_magnetization_conserved_for_xx(self):
        """[H_S, H_0] = 0 for a uniform XX chain."""
        space = system_space(4)
        h_s = chain_hamiltonian(ChainSpec.uniform(4, h=1.0), space)
        h_0 = conserved_magnetization(space, 1.0)
        assert frobenius_norm(h_s @ h_0 - h_0 @ h_s) == 0.0

    def test_magnetization_not_conserved_for_xy(self):
        """Anisotropic couplings break the conservation."""
        space = system_space(3)
        h_s = chain_hamiltonian(ChainSpec.uniform(3, J_x=1.0, J_y=2.0), space)
        h_0 = conserved_magnetization(space, 1.0)
        assert frobenius_norm(h_s @ h_0 - h_0 @ h_s) > 0.1

    def test_field_count_checked(self):
        """len(h) must equal N."""
        with pytest.raises(ValueError):
            ChainSpec(N=3, h=(1.0, 1.0))


class TestBoundaryCoupling:
    """Test cases for boundary_coupling."""

    def test_ladder_form(self):
        """V_L = 2 J (s+ ⊗ s- + s- ⊗ s+) on copy ⊗ site."""
        space = joint_space(1, ["L"])
        expected = 2 * 0.7 * (np.kron(SIGMA_PLUS, SIGMA_MINUS) + np.kron(SIGMA_MINUS, SIGMA_PLUS))
        assert np.allclose(boundary_coupling(space, "L", 0.7), expected)

    def test_zero_strength(self):
        """Strength 0 is the zero operator."""
        assert np.allclose(boundary_coupling(joint_space(2, ["R"]), "R", 0.0), 0)

    def test_averages_to_zero_in_copy_state(self):
        """Tr_r(V_r (omega_r ⊗ anything)) = 0."""
        rng = np.random.default_rng(3)
        space = joint_space(2, ["L"])
        v = boundary_coupling(space, "L", 1.0)
        omega = thermal_spin(0.8, 1.5).matrix
        joint = np.kron(omega, random_density_matrix(4, rng))
        assert np.allclose(partial_trace(v @ joint, space, ["1", "2"]), 0, atol=1e-14)

    def test_acts_only_on_copy_and_boundary(self):
        """V_L commutes with every operator on site 2."""
        space = joint_space(2, ["L"])
        v = boundary_coupling(space, "L", 1.0)
        for pauli in ("x", "y", "z"):
            op = site_op(space, 2, pauli)
            assert np.allclose(v @ op, op @ v)


class TestThermalSpin:
    """Test cases for thermal_spin and related states."""

    def test_infinite_temperature(self):
        """beta = 0 gives I/2 and M = 0."""
        state = thermal_spin(0.0, 2.0)
        assert np.allclose(state.matrix, np.eye(2) / 2)
        assert state.magnetization == 0.0

    def test_magnetization_value(self):
        """beta = h = 1 gives M = -tanh(1/2)."""
        state = thermal_spin(1.0, 1.0)
        assert state.magnetization == pytest.approx(-0.46211715726000974, abs=1e-12)
        assert np.trace(SIGMA_Z @ state.matrix).real == pytest.approx(state.magnetization, abs=1e-12)
        assert np.trace(state.matrix).real == pytest.approx(1.0, abs=1e-15)

    def test_zero_field(self):
        """h = 0 gives I/2 for any beta."""
        assert np.allclose(thermal_spin(5.0, 0.0).matrix, np.eye(2) / 2)

    def test_sign_convention(self):
        """beta, h > 0 polarize toward sz = -1."""
        assert thermal_spin(2.0, 1.0).magnetization < 0

    def test_large_argument_finite(self):
        """Very cold spins stay normalized."""
        state = thermal_spin(1e4, 1.0)
        assert np.all(np.isfinite(state.matrix))
        assert state.magnetization == pytest.approx(-1.0)

    def test_product_state(self):
        """The generalized Gibbs state is a product of single-spin states."""
        rho = product_thermal_state(3, 0.7, 1.2)
        omega = thermal_spin(0.7, 1.2).matrix
        assert np.allclose(rho, np.kron(np.kron(omega, omega), omega))

    def test_basis_state(self):
        """'ud' puts the first spin up and the second down."""
        rho = basis_state(2, "ud")
        assert rho[1, 1] == 1.0
        with pytest.raises(StructuralError):
            basis_state(2, "uux")


class TestBathSpec:
    """Test cases for BathSpec."""

    def test_resolve_defaults_to_boundary_field(self):
        """h_L defaults to h_1 and h_R to h_N."""
        chain = ChainSpec(N=3, h=(1.0, 2.0, 3.0))
        assert BathSpec(side="L", beta=1.0).resolve(chain).h == 1.0
        assert BathSpec(side="R", beta=1.0).resolve(chain).h == 3.0
        assert BathSpec(side="R", beta=1.0, h=7.0).resolve(chain).h == 7.0

    def test_lambda_alias(self):
        """'lambda' is accepted as the rate key."""
        assert BathSpec(**{"side": "L", "beta": 1.0, "lambda": 0.3}).lam == 0.3

    def test_lambda_positive(self):
        """lambda must be positive."""
        with pytest.raises(ValueError):
            BathSpec(side="L", beta=1.0, lam=0.0)

    def test_bath_hamiltonian_needs_field(self):
        """An unresolved copy field cannot build H_r."""
        with pytest.raises(StructuralError):
            bath_hamiltonian(joint_space(1, ["L"]), BathSpec(side="L", beta=1.0))

    def test_magnetization(self):
        """M_r = -tanh(beta h / 2)."""
        assert BathSpec(side="L", beta=2.0, h=1.0).magnetization == pytest.approx(-math.tanh(1.0))
