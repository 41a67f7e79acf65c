"""Spin-1/2 operators, XY chain Hamiltonians, boundary couplings and thermal spins.

Basis convention: |0> is the sigma^z = +1 ("up") state and sigma^+ = |0><1| raises
down to up. Units hbar = k_B = 1.
"""

import math
from typing import Iterable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .densemat import Operator, TensorSpace, embed_local, kron_all
from .errors import StructuralError
from .models import BathSpec, ChainSpec, Side

Pauli = Literal["x", "y", "z", "+", "-", "i"]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SIGMA_PLUS = 0.5 * (SIGMA_X + 1j * SIGMA_Y)
SIGMA_MINUS = 0.5 * (SIGMA_X - 1j * SIGMA_Y)
IDENTITY_2 = np.eye(2, dtype=np.complex128)

PAULI = {
    "x": SIGMA_X,
    "y": SIGMA_Y,
    "z": SIGMA_Z,
    "+": SIGMA_PLUS,
    "-": SIGMA_MINUS,
    "i": IDENTITY_2,
}


class ThermalSpinState(BaseModel):
    """Gibbs state of a single spin with Hamiltonian (h/2) sigma^z."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    beta: float = Field(..., description="Inverse temperature")
    h: float = Field(..., description="Local field")
    matrix: np.ndarray = Field(..., description="2x2 density matrix in the sigma^z basis")
    magnetization: float = Field(..., description="Tr(sigma^z omega) = -tanh(beta h / 2)")
    Z: float = Field(..., description="Partition function")


def system_space(n_sites: int) -> TensorSpace:
    """Chain of ``n_sites`` spins labeled "1" … "N"."""
    if n_sites < 1:
        raise StructuralError("a chain needs at least one site")
    return TensorSpace(factor_dims=(2,) * n_sites)


def joint_space(n_sites: int, sides: Iterable[Side]) -> TensorSpace:
    """System plus bath copies in the order [L] ⊗ sites ⊗ [R]."""
    present = set(sides)
    unknown = present - {"L", "R"}
    if unknown:
        raise StructuralError(f"unknown bath sides: {sorted(unknown)}")
    labels = (["L"] if "L" in present else []) + [str(j) for j in range(1, n_sites + 1)]
    if "R" in present:
        labels.append("R")
    return TensorSpace(factor_dims=(2,) * len(labels), labels=tuple(labels))


def chain_sites(space: TensorSpace) -> list[str]:
    """Labels of the system sites in ``space``, in chain order."""
    return [label for label in space.labels if label not in ("L", "R")]


def site_op(space: TensorSpace, site: Union[int, str], pauli: Pauli) -> Operator:
    """Single-site Pauli (or ladder) operator embedded in ``space``."""
    if pauli not in PAULI:
        raise StructuralError(f"unknown Pauli label {pauli!r}")
    return embed_local(PAULI[pauli], space, site)


def chain_hamiltonian(spec: ChainSpec, space: TensorSpace | None = None) -> Operator:
    """H_S = 1/2 sum_j h_j sz_j - sum_j (J_x sx_j sx_{j+1} + J_y sy_j sy_{j+1})."""
    space = space or system_space(spec.N)
    sites = chain_sites(space)
    if len(sites) != spec.N:
        raise StructuralError(f"space holds {len(sites)} sites, chain has N={spec.N}")

    h_s = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
    for site, field in zip(sites, spec.h):
        h_s += 0.5 * field * site_op(space, site, "z")
    for left, right in zip(sites, sites[1:]):
        if spec.J_x:
            h_s -= spec.J_x * site_op(space, left, "x") @ site_op(space, right, "x")
        if spec.J_y:
            h_s -= spec.J_y * site_op(space, left, "y") @ site_op(space, right, "y")
    return h_s


def boundary_site(space: TensorSpace, side: Side) -> str:
    sites = chain_sites(space)
    return sites[0] if side == "L" else sites[-1]


def boundary_coupling(space: TensorSpace, side: Side, strength: float) -> Operator:
    """strength * (sx_r sx_b + sy_r sy_b) between copy ``side`` and its boundary site."""
    site = boundary_site(space, side)
    return strength * (
        site_op(space, side, "x") @ site_op(space, site, "x")
        + site_op(space, side, "y") @ site_op(space, site, "y")
    )


def bath_hamiltonian(space: TensorSpace, bath: BathSpec) -> Operator:
    """(h_r / 2) sigma^z on the copy factor."""
    if bath.h is None:
        raise StructuralError(f"bath {bath.side} has no field; resolve it against the chain first")
    return 0.5 * bath.h * site_op(space, bath.side, "z")


def thermal_spin(beta: float, h: float) -> ThermalSpinState:
    """omega_beta = exp(-beta h sz / 2) / Z with magnetization -tanh(beta h / 2)."""
    x = 0.5 * beta * h
    # shift by |x| so that large beta*h stays finite
    weights = np.exp(np.array([-x, x]) - abs(x))
    z = float(weights.sum())
    matrix = np.diag(weights / z).astype(np.complex128)
    return ThermalSpinState(
        beta=beta,
        h=h,
        matrix=matrix,
        magnetization=-math.tanh(x),
        Z=z * math.exp(abs(x)) if abs(x) < 700 else math.inf,
    )


def conserved_magnetization(space: TensorSpace, h: float) -> Operator:
    """H_0 = (h/2) sum_j sz_j over the chain sites of ``space``."""
    return sum(0.5 * h * site_op(space, site, "z") for site in chain_sites(space))


def product_thermal_state(n_sites: int, beta: float, h: float) -> Operator:
    """Generalized Gibbs state ⊗_j omega_beta(h sz_j / 2)."""
    omega = thermal_spin(beta, h).matrix
    return kron_all([omega] * n_sites)


def global_gibbs_state(h_s: Operator, beta: float) -> Operator:
    """exp(-beta H_S) / Z."""
    eigenvalues, v = np.linalg.eigh(0.5 * (h_s + h_s.conj().T))
    weights = np.exp(-beta * (eigenvalues - eigenvalues[0]))
    rho = (v * weights) @ v.conj().T
    return rho / np.trace(rho).real


def basis_state(n_sites: int, spins: str) -> Operator:
    """Pure product state from a string of 'u'/'d' (sigma^z = +1 / -1)."""
    if len(spins) != n_sites or set(spins) - {"u", "d"}:
        raise StructuralError(f"spin pattern {spins!r} does not describe {n_sites} sites")
    up = np.array([[1, 0], [0, 0]], dtype=np.complex128)
    down = np.array([[0, 0], [0, 1]], dtype=np.complex128)
    return kron_all(up if s == "u" else down for s in spins)
