"""Boundary-driven Lindblad equation: dissipators, time evolution and steady states.

Dissipators follow the convention D(rho) = sum_mu gamma_mu (2 L rho L^dag - {L^dag L, rho}).
Vectorization is column stacking, so vec(A X B) = (B^T ⊗ A) vec(X).
"""

import logging
import math
from typing import Iterable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .densemat import (
    TOL_NULL,
    NullVector,
    Operator,
    TensorSpace,
    anticommutator,
    as_matrix,
    commutator,
    dagger,
    frobenius_norm,
    hermitize,
    is_density_matrix,
    kron,
    null_vector,
    partial_trace,
    spectral_norm,
    unvec,
    vec,
)
from .errors import ContractError, StructuralError
from .models import BathSpec, ChainSpec, EvolutionResult, NessResult, Side
from .spin_system import (
    ThermalSpinState,
    basis_state,
    boundary_coupling,
    chain_hamiltonian,
    chain_sites,
    joint_space,
    site_op,
    system_space,
    thermal_spin,
)

logger = logging.getLogger(__name__)

TOL_PSD = 1e-8
TOL_TRACE = 1e-9
TOL_COUPLING = 1e-12
# dense 4^N x 4^N Liouvillian; N = 6 is 4096 x 4096 complex
MAX_NESS_SITES = 6


class Channel(BaseModel):
    """One jump operator with its rate."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rate: float = Field(..., ge=0)
    op: np.ndarray
    op_dag_op: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _precompute(cls, data):
        if isinstance(data, dict) and data.get("op_dag_op") is None and data.get("op") is not None:
            op = np.asarray(data["op"], dtype=np.complex128)
            data = {**data, "op": op, "op_dag_op": dagger(op) @ op}
        return data


class Dissipator(BaseModel):
    """Explicit channel form of one bath's dissipator."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    side: Side
    channels: tuple[Channel, ...]
    convention: Literal["two-gamma"] = "two-gamma"

    def __call__(self, rho: Operator) -> Operator:
        out = np.zeros_like(rho, dtype=np.complex128)
        for ch in self.channels:
            out += ch.rate * (
                2.0 * ch.op @ rho @ dagger(ch.op) - ch.op_dag_op @ rho - rho @ ch.op_dag_op
            )
        return out

    def adjoint(self, a: Operator) -> Operator:
        """Heisenberg-picture action on an observable."""
        out = np.zeros_like(a, dtype=np.complex128)
        for ch in self.channels:
            out += ch.rate * (2.0 * dagger(ch.op) @ a @ ch.op - ch.op_dag_op @ a - a @ ch.op_dag_op)
        return out

    def superoperator(self) -> Operator:
        """Matrix acting on column-stacked density matrices."""
        dim = self.channels[0].op.shape[0]
        eye = np.eye(dim, dtype=np.complex128)
        out = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
        for ch in self.channels:
            out += ch.rate * (
                2.0 * np.kron(ch.op.conj(), ch.op)
                - np.kron(eye, ch.op_dag_op)
                - np.kron(ch.op_dag_op.T, eye)
            )
        return out


class BoundaryCoupling(BaseModel):
    """Scaled coupling v_r between one bath copy and the chain, with the copy's Gibbs state.

    ``space`` is the two-party space: copy ⊗ system for the left bath and
    system ⊗ copy for the right bath. Calling the coupling applies
    D_r(rho) = Tr_r[v (rho ⊗ omega) v] - 1/2 Tr_r {v^2, rho ⊗ omega}.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    side: Side
    v: np.ndarray
    omega: ThermalSpinState
    space: TensorSpace

    @property
    def system_labels(self) -> list[str]:
        return chain_sites(self.space)

    def embed_state(self, rho: Operator) -> Operator:
        return kron(self.omega.matrix, rho) if self.side == "L" else kron(rho, self.omega.matrix)

    def embed_system(self, op: Operator) -> Operator:
        eye = np.eye(2, dtype=np.complex128)
        return kron(eye, op) if self.side == "L" else kron(op, eye)

    def copy_hamiltonian(self) -> Operator:
        """(h_r / 2) sigma^z on the copy factor."""
        return 0.5 * self.omega.h * site_op(self.space, self.side, "z")

    def __call__(self, rho: Operator) -> Operator:
        joint = self.embed_state(rho)
        v2 = self.v @ self.v
        out = self.v @ joint @ self.v - 0.5 * anticommutator(v2, joint)
        return partial_trace(out, self.space, self.system_labels)


def dissipator_from_coupling(
    v: Operator, omega: ThermalSpinState, space: TensorSpace, side: Side
) -> BoundaryCoupling:
    """Wrap v_r and omega_r as the microscopic dissipator map.

    Raises:
        ContractError: if v is not Hermitian or Tr_r(v (1 ⊗ omega)) != 0.
    """
    v = as_matrix(v)
    if v.shape != (space.total_dim, space.total_dim):
        raise StructuralError(f"coupling of shape {v.shape} does not act on {space.labels}")
    scale = max(frobenius_norm(v), 1.0)
    if frobenius_norm(v - v.conj().T) > TOL_COUPLING * scale:
        raise ContractError(f"coupling for side {side} is not Hermitian")
    coupling = BoundaryCoupling(side=side, v=v, omega=omega, space=space)
    sys_dim = space.total_dim // 2
    reduced = partial_trace(v @ coupling.embed_state(np.eye(sys_dim)), space, coupling.system_labels)
    if frobenius_norm(reduced) > TOL_COUPLING * scale:
        raise ContractError(
            f"Tr_r(v omega) = {frobenius_norm(reduced):.3e} for side {side}; "
            "the coupling must average to zero in the copy's Gibbs state"
        )
    return coupling


def spin_coupling(chain: ChainSpec, bath: BathSpec) -> BoundaryCoupling:
    """v_r = sqrt(lambda_r) (sx_r sx_b + sy_r sy_b) for a resolved spin bath."""
    bath = bath.resolve(chain)
    space = joint_space(chain.N, [bath.side])
    v = boundary_coupling(space, bath.side, math.sqrt(bath.lam))
    return dissipator_from_coupling(v, thermal_spin(bath.beta, bath.h), space, bath.side)


def spin_dissipator(bath: BathSpec, n_sites: int) -> Dissipator:
    """gamma^± = lambda (1 ± M), L^± = sigma^± on the boundary site."""
    if bath.h is None:
        raise StructuralError(f"bath {bath.side} field is unresolved")
    space = system_space(n_sites)
    site = 1 if bath.side == "L" else n_sites
    m = bath.magnetization
    return Dissipator(
        side=bath.side,
        channels=(
            Channel(rate=bath.lam * (1.0 + m), op=site_op(space, site, "+")),
            Channel(rate=bath.lam * (1.0 - m), op=site_op(space, site, "-")),
        ),
    )


class LindbladModel(BaseModel):
    """Chain Hamiltonian plus one boundary dissipator per attached bath."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    chain: ChainSpec
    h_s: np.ndarray
    dissipators: tuple[Dissipator, ...] = ()
    baths: tuple[BathSpec, ...] = ()
    couplings: tuple[BoundaryCoupling, ...] = ()

    @property
    def dim(self) -> int:
        return self.h_s.shape[0]

    @property
    def lam_max(self) -> float:
        return max((b.lam for b in self.baths), default=0.0)

    def bath(self, side: Side) -> BathSpec:
        for b in self.baths:
            if b.side == side:
                return b
        raise StructuralError(f"no bath attached on side {side}")

    def coupling(self, side: Side) -> BoundaryCoupling:
        for c in self.couplings:
            if c.side == side:
                return c
        raise StructuralError(f"no coupling on side {side}")

    def dissipator(self, side: Side) -> Dissipator:
        for d in self.dissipators:
            if d.side == side:
                return d
        raise StructuralError(f"no dissipator on side {side}")

    def dissipation(self, rho: Operator) -> Operator:
        out = np.zeros_like(rho, dtype=np.complex128)
        for d in self.dissipators:
            out += d(rho)
        return out


def build_model(chain: ChainSpec, baths: Iterable[BathSpec]) -> LindbladModel:
    resolved = tuple(b.resolve(chain) for b in baths)
    sides = [b.side for b in resolved]
    if len(set(sides)) != len(sides):
        raise StructuralError(f"at most one bath per side, got {sides}")
    return LindbladModel(
        chain=chain,
        h_s=chain_hamiltonian(chain),
        dissipators=tuple(spin_dissipator(b, chain.N) for b in resolved),
        baths=resolved,
        couplings=tuple(spin_coupling(chain, b) for b in resolved),
    )


def lindblad_rhs(model: LindbladModel, rho: Operator) -> Operator:
    """-i[H_S, rho] + sum_r D_r(rho)."""
    return -1j * commutator(model.h_s, rho) + model.dissipation(rho)


def default_time_step(model: LindbladModel) -> float:
    """0.01 / max(lambda, ||H_S||_2)."""
    scale = max(model.lam_max, spectral_norm(model.h_s))
    return 0.01 / scale if scale > 0 else 0.01


def rk4_step(rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def segment_grid(t_final: float, samples: int, dt: float) -> tuple[float, int]:
    """Segment length between stored samples and RK4 steps per segment."""
    seg = t_final / (samples - 1)
    return seg, max(1, math.ceil(seg / dt - 1e-9))


def evolve(
    model: LindbladModel,
    rho0: Operator,
    t_final: float,
    dt: Optional[float] = None,
    samples: int = 101,
    tol_psd: float = TOL_PSD,
    max_halvings: int = 4,
) -> EvolutionResult:
    """Fixed-step RK4 integration of the Lindblad equation.

    Stored states are re-Hermitized and renormalized. A segment whose result has an
    eigenvalue below ``-tol_psd`` (or trace drift above 1e-9) is recomputed with half
    the step, up to ``max_halvings`` times.

    Raises:
        ContractError: if positivity cannot be restored.
    """
    rho0 = as_matrix(rho0)
    if rho0.shape != (model.dim, model.dim):
        raise StructuralError(f"initial state of shape {rho0.shape} does not fit dim {model.dim}")
    if not is_density_matrix(rho0):
        raise ContractError("initial state is not a density matrix")
    if t_final <= 0 or samples < 2:
        raise StructuralError("t_final must be positive and samples >= 2")
    base_dt = dt or default_time_step(model)
    if base_dt <= 0:
        raise StructuralError("dt must be positive")

    seg, steps = segment_grid(t_final, samples, base_dt)
    rhs = lambda r: lindblad_rhs(model, r)  # noqa: E731

    result = EvolutionResult(times=[0.0], states=[rho0.copy()], dt=seg / steps)
    rho = rho0.copy()
    for k in range(samples - 1):
        halvings = 0
        while True:
            n = steps * 2**halvings
            h = seg / n
            trial = rho
            for _ in range(n):
                trial = rk4_step(rhs, trial, h)
            herm_drift = frobenius_norm(trial - trial.conj().T)
            trial = hermitize(trial)
            trace = float(np.trace(trial).real)
            drift = abs(trace - 1.0)
            trial = trial / trace
            min_eig = float(np.linalg.eigvalsh(trial)[0])
            if min_eig >= -tol_psd and drift <= TOL_TRACE:
                break
            if halvings >= max_halvings:
                raise ContractError(
                    f"positivity lost at t={(k + 1) * seg:.4g}: min eigenvalue {min_eig:.3e}, "
                    f"trace drift {drift:.3e} after {halvings} step halvings"
                )
            halvings += 1
            logger.warning("halving RK4 step to %.3e at t=%.4g (min eig %.3e)", seg / (steps * 2**halvings), k * seg, min_eig)
        rho = trial
        result.times.append((k + 1) * seg)
        result.states.append(rho)
        result.halvings = max(result.halvings, halvings)
        result.max_psd_violation = max(result.max_psd_violation, max(0.0, -min_eig))
        result.max_trace_drift = max(result.max_trace_drift, drift)
        result.max_hermiticity_drift = max(result.max_hermiticity_drift, herm_drift)
    logger.debug("evolve: %d samples, dt=%.3e, max psd violation %.2e", samples, result.dt, result.max_psd_violation)
    return result


def liouvillian_matrix(model: LindbladModel) -> Operator:
    """L-hat with L-hat vec(rho) = vec(lindblad_rhs(rho)), column stacking."""
    if model.chain.N > MAX_NESS_SITES:
        raise StructuralError(
            f"dense Liouvillian limited to N <= {MAX_NESS_SITES} sites, got N={model.chain.N}"
        )
    eye = np.eye(model.dim, dtype=np.complex128)
    lhat = -1j * (np.kron(eye, model.h_s) - np.kron(model.h_s.T, eye))
    for d in model.dissipators:
        lhat += d.superoperator()
    return lhat


def _ness_direct(lhat: Operator, dim: int) -> Optional[NullVector]:
    """Solve L-hat v = 0 with the first row replaced by the trace condition.

    Returns None when the bordered system is singular, i.e. the steady state is
    not unique or the solve is unreliable.
    """
    bordered = lhat.copy()
    bordered[0, :] = vec(np.eye(dim, dtype=np.complex128))
    rhs = np.zeros(dim * dim, dtype=np.complex128)
    rhs[0] = 1.0
    try:
        v = np.linalg.solve(bordered, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(v)):
        return None
    norm = float(np.linalg.norm(v))
    residual = (float(np.linalg.norm(lhat @ v)) / norm) ** 2
    if residual >= TOL_NULL:
        return None
    return NullVector(vector=(v / norm).reshape(-1, 1), residual=residual, multiplicity=1)


def ness(
    model: LindbladModel,
    evolution_time: Optional[float] = None,
    method: Literal["direct", "svd"] = "direct",
) -> NessResult:
    """Steady state from the null space of the Liouvillian.

    ``direct`` solves the trace-bordered linear system and falls back to the SVD
    null vector when that system is singular; ``svd`` always takes the SVD and
    reports the null-space multiplicity. When ``evolution_time`` is given the
    result is cross-checked against a long evolution from the maximally mixed state.
    """
    lhat = liouvillian_matrix(model)
    nv = _ness_direct(lhat, model.dim) if method == "direct" else None
    if nv is None:
        if method == "direct":
            logger.info("bordered steady-state system is singular; using the SVD null vector")
        nv = null_vector(lhat)
    rho = unvec(nv.vector, model.dim)
    trace = np.trace(rho)
    if abs(trace) < 1e-12:
        raise ContractError("null vector of the Liouvillian has vanishing trace")
    rho = hermitize(rho / trace)
    rho = rho / np.trace(rho).real
    if nv.multiplicity > 1:
        logger.warning("steady state is not unique: null-space multiplicity %d", nv.multiplicity)

    distance = None
    if evolution_time is not None:
        mixed = np.eye(model.dim, dtype=np.complex128) / model.dim
        final = evolve(model, mixed, evolution_time, samples=2).final
        distance = frobenius_norm(rho - final)
    return NessResult(
        rho=rho,
        residual=nv.residual,
        multiplicity=nv.multiplicity,
        rhs_norm=frobenius_norm(lindblad_rhs(model, rho)),
        evolution_distance=distance,
    )


def initial_state(n_sites: int, kind: str) -> Operator:
    """'mixed' (identity / d), 'up' or 'down' (all spins polarized)."""
    if kind == "mixed":
        dim = 2**n_sites
        return np.eye(dim, dtype=np.complex128) / dim
    if kind == "up":
        return basis_state(n_sites, "u" * n_sites)
    if kind == "down":
        return basis_state(n_sites, "d" * n_sites)
    raise StructuralError(f"unknown initial state {kind!r}")


def superoperator_of(fn, dim: int) -> Operator:
    """Matrix of a linear map on dim x dim matrices, column stacking."""
    out = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for col in range(dim * dim):
        basis = np.zeros(dim * dim, dtype=np.complex128)
        basis[col] = 1.0
        out[:, col] = fn(unvec(basis, dim)).reshape(-1, order="F")
    return out

