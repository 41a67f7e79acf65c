"""Exact repeated-interaction (collision) model.

Every collision couples the chain to fresh thermal copies of the attached baths for a
time tau under one joint unitary, then discards the copies. Work, heat and entropy
production are booked at the level of system plus copies.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from .densemat import (
    Operator,
    embed_local,
    expm_unitary,
    frobenius_norm,
    hermitize,
    kron_all,
    partial_trace,
)
from .errors import ContractError, StructuralError
from .lindblad_engine import build_model, evolve
from .models import (
    BathSpec,
    ChainSpec,
    CollisionRecord,
    ConvergenceReport,
    RIConfig,
    RIScaling,
    RITrajectory,
    Side,
)
from .spin_system import (
    bath_hamiltonian,
    boundary_coupling,
    chain_hamiltonian,
    chain_sites,
    joint_space,
    thermal_spin,
)
from .thermo import mutual_information, relative_entropy, von_neumann_entropy

logger = logging.getLogger(__name__)

TOL_FRESH = 1e-12


def coupling_strength(lam: float, tau: float, scaling: RIScaling) -> float:
    """J_r = sqrt(lambda_r / tau) when scaled, sqrt(lambda_r) otherwise."""
    return math.sqrt(lam / tau) if scaling == "scaled_V" else math.sqrt(lam)


class CollisionModel:
    """Joint unitary and fresh-copy state for one RIConfig."""

    def __init__(self, config: RIConfig):
        self.config = config
        self.chain = config.chain
        self.baths: List[BathSpec] = sorted(
            (b.resolve(config.chain) for b in config.baths), key=lambda b: b.side
        )
        self.space = joint_space(self.chain.N, [b.side for b in self.baths])
        self.system_labels = chain_sites(self.space)
        self.copy_labels = [b.side for b in self.baths]

        self.h_system = chain_hamiltonian(self.chain)
        self.h_system_joint = chain_hamiltonian(self.chain, self.space)
        self.h_copies: Dict[Side, Operator] = {b.side: bath_hamiltonian(self.space, b) for b in self.baths}
        self.couplings: Dict[Side, Operator] = {
            b.side: boundary_coupling(self.space, b.side, coupling_strength(b.lam, config.tau, config.scaling))
            for b in self.baths
        }
        self.omegas = {b.side: thermal_spin(b.beta, b.h) for b in self.baths}
        self.copies_state = kron_all(self.omegas[side].matrix for side in self.copy_labels)
        self._check_fresh()

        total = self.h_system_joint + sum(self.h_copies.values()) + sum(self.couplings.values())
        self.unitary = expm_unitary(total, config.tau)
        logger.debug(
            "collision model: N=%d sides=%s tau=%g scaling=%s dim=%d",
            self.chain.N,
            self.copy_labels,
            config.tau,
            config.scaling,
            self.space.total_dim,
        )

    def _check_fresh(self) -> None:
        """Tr_r(V_r (1 ⊗ omega_r)) must vanish for every coupling."""
        for side, v in self.couplings.items():
            keep = [label for label in self.space.labels if label != side]
            reduced = partial_trace(v @ embed_local(self.omegas[side].matrix, self.space, side), self.space, keep)
            if frobenius_norm(reduced) > TOL_FRESH * max(1.0, frobenius_norm(v)):
                raise ContractError(f"coupling on side {side} does not average to zero in the copy state")

    def embed(self, rho: Operator) -> Operator:
        """rho_S ⊗ fresh copies in the [L] ⊗ sites ⊗ [R] order."""
        factors = []
        if "L" in self.omegas:
            factors.append(self.omegas["L"].matrix)
        factors.append(rho)
        if "R" in self.omegas:
            factors.append(self.omegas["R"].matrix)
        return kron_all(factors)

    def step(self, rho: Operator, n: int = 1) -> CollisionRecord:
        joint = self.embed(rho)
        out = self.unitary @ joint @ self.unitary.conj().T
        rho_next = hermitize(partial_trace(out, self.space, self.system_labels))
        copies_out = hermitize(partial_trace(out, self.space, self.copy_labels))

        work = {side: -float(np.trace(v @ out).real) for side, v in self.couplings.items()}
        heat = {
            side: float(np.trace(h @ joint).real - np.trace(h @ out).real) for side, h in self.h_copies.items()
        }

        s_before = von_neumann_entropy(rho)
        s_after = von_neumann_entropy(rho_next)
        d_term = relative_entropy(copies_out, self.copies_state)
        i_term = mutual_information(out, self.space, self.system_labels)

        refreshed = self.embed(rho_next)
        incoming = sum(float(np.trace(v @ refreshed).real) for v in self.couplings.values())
        e_before = float(np.trace(self.h_system @ rho).real)
        e_after = float(np.trace(self.h_system @ rho_next).real)

        return CollisionRecord(
            n=n,
            rho_s=rho_next,
            dW_L=work.get("L", 0.0),
            dW_R=work.get("R", 0.0),
            dQ_L=heat.get("L", 0.0),
            dQ_R=heat.get("R", 0.0),
            diS=d_term + i_term,
            D_term=d_term,
            I_term=i_term,
            dS=s_after - s_before,
            E_S=e_after,
            dE_S=e_after - e_before,
            incoming_work=incoming,
            joint_purity_drift=abs(
                float(np.trace(out @ out).real) - float(np.trace(joint @ joint).real)
            ),
        )

    def run(self, rho0: Operator, steps: Optional[int] = None) -> RITrajectory:
        steps = self.config.steps if steps is None else steps
        trajectory = RITrajectory(
            tau=self.config.tau, initial_state=rho0, initial_entropy=von_neumann_entropy(rho0)
        )
        rho = rho0
        for n in range(1, steps + 1):
            record = self.step(rho, n)
            trajectory.records.append(record)
            rho = record.rho_s
        return trajectory


def ri_step(rho: Operator, config: RIConfig) -> CollisionRecord:
    """One collision of ``rho`` with fresh copies."""
    return CollisionModel(config).step(rho)


def ri_trajectory(rho0: Operator, config: RIConfig) -> RITrajectory:
    """``config.steps`` collisions, each with fresh copies."""
    return CollisionModel(config).run(rho0)


def steps_for(t_final: float, tau: float) -> int:
    steps = round(t_final / tau)
    if steps < 1 or abs(steps * tau - t_final) > 1e-9 * t_final:
        raise StructuralError(f"t_final={t_final} is not an integer multiple of tau={tau}")
    return steps


def ri_lindblad_convergence(
    rho0: Operator,
    chain: ChainSpec,
    baths: Sequence[BathSpec],
    t_final: float,
    tau_list: Sequence[float],
    scaling: RIScaling = "scaled_V",
    workers: int = 1,
    reference: Optional[Operator] = None,
) -> ConvergenceReport:
    """Frobenius distance between the collision-model and Lindblad states at ``t_final``.

    The slope is the least-squares fit of log(error) against log(tau); running
    slopes compare consecutive tau values.
    """
    taus = list(tau_list)
    plan = [(tau, steps_for(t_final, tau)) for tau in taus]
    if reference is None:
        reference = evolve(build_model(chain, baths), rho0, t_final, samples=2).final

    def distance(item) -> float:
        tau, steps = item
        config = RIConfig(chain=chain, baths=tuple(baths), tau=tau, steps=steps, scaling=scaling)
        final = CollisionModel(config).run(rho0).final_state
        return frobenius_norm(final - reference)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(distance, plan))
    else:
        errors = [distance(item) for item in plan]

    log_tau = np.log(taus)
    log_err = np.log(np.maximum(errors, 1e-300))
    slope = float(np.polyfit(log_tau, log_err, 1)[0]) if len(taus) > 1 else float("nan")
    running: List[Optional[float]] = [None]
    for i in range(1, len(taus)):
        running.append(float((log_err[i] - log_err[i - 1]) / (log_tau[i] - log_tau[i - 1])))
    logger.info("convergence (%s): errors %s slope %.3f", scaling, ["%.3e" % e for e in errors], slope)
    return ConvergenceReport(taus=taus, errors=errors, slope=slope, running_slopes=running, scaling=scaling)
