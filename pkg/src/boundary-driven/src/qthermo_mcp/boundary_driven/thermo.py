"""Heat, work and entropy production in the boundary-driven Lindblad limit.

Consistent accounting treats every bath copy as part of the universe: for bath r,
W_r = D_r(H_S + H_r) and Q_r = -D_r(H_r). The weak-coupling accounting, which
only sees H_S, lives in ``naive_weak_coupling_rates`` and is for diagnostics.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .densemat import (
    Operator,
    TensorSpace,
    anticommutator,
    as_matrix,
    frobenius_norm,
    hermitian_function,
    hermitize,
    partial_trace,
)
from .errors import ContractError, StructuralError
from .lindblad_engine import BoundaryCoupling, LindbladModel, lindblad_rhs
from .models import (
    BathSpec,
    EntropyProductionRate,
    NaiveRates,
    RegimeReport,
    Side,
    ThermoRecord,
)
from .spin_system import global_gibbs_state, site_op, system_space

logger = logging.getLogger(__name__)

EIG_FLOOR = 1e-14
TOL_REGIME = 1e-9
TOL_RATE = 1e-12
TOL_IMAG = 1e-9


# entropy kernel


def log_psd(rho: Operator, floor: float = EIG_FLOOR) -> Operator:
    """Matrix logarithm of a positive semidefinite matrix with eigenvalues floored."""
    return hermitian_function(hermitize(rho), lambda w: np.log(np.maximum(w, floor)))


def von_neumann_entropy(rho: Operator) -> float:
    """S = -Tr(rho ln rho) with 0 ln 0 = 0."""
    w = np.linalg.eigvalsh(hermitize(as_matrix(rho)))
    w = w[w > EIG_FLOOR]
    return float(-np.sum(w * np.log(w)))


def relative_entropy(rho: Operator, sigma: Operator) -> float:
    """D(rho || sigma) = Tr rho (ln rho - ln sigma); the floor applies to sigma."""
    rho = hermitize(as_matrix(rho))
    value = -von_neumann_entropy(rho) - float(np.trace(rho @ log_psd(sigma)).real)
    return value


def mutual_information(rho: Operator, space: TensorSpace, part: Sequence[Union[int, str]]) -> float:
    """I(A : B) = S(A) + S(B) - S(AB) with A = ``part`` and B its complement."""
    a = {space.index(p) if isinstance(p, str) else p for p in part}
    b = [i for i in range(space.n_factors) if i not in a]
    if not a or not b:
        raise StructuralError("mutual information needs two non-empty parts")
    return (
        von_neumann_entropy(partial_trace(rho, space, sorted(a)))
        + von_neumann_entropy(partial_trace(rho, space, b))
        - von_neumann_entropy(rho)
    )


# rates


def d_functional(coupling: BoundaryCoupling, rho: Operator, a: Operator) -> float:
    """D_r(A) = Tr[(v A v - 1/2 {v^2, A}) rho ⊗ omega_r] for A on copy ⊗ system."""
    v = coupling.v
    kernel = v @ a @ v - 0.5 * anticommutator(v @ v, a)
    return float(np.trace(kernel @ coupling.embed_state(rho)).real)


def consistent_rates(model: LindbladModel, rho: Operator) -> Dict[Side, Tuple[float, float]]:
    """Per-side (Wdot_r, Qdot_r) from the D_r functional."""
    rates: Dict[Side, Tuple[float, float]] = {}
    for c in model.couplings:
        h_r = c.copy_hamiltonian()
        wdot = d_functional(c, rho, c.embed_system(model.h_s) + h_r)
        qdot = -d_functional(c, rho, h_r)
        rates[c.side] = (wdot, qdot)
    return rates


def _expect(op: Operator, rho: Operator) -> float:
    return float(np.trace(op @ rho).real)


def boundary_rates_spin(model: LindbladModel, rho: Operator, t: float = 0.0) -> ThermoRecord:
    """Closed-form spin-bath rates.

    Qdot_r = 2 h_r lambda_r (M_r - <sz_b>) and
    Wdot_r = 2 lambda_r [(h_b - h_r)(M_r - <sz_b>) + <J_x sx_b sx_n + J_y sy_b sy_n>]
    with b the boundary site of side r and n its neighbour.
    """
    chain = model.chain
    space = system_space(chain.N)
    rates: Dict[Side, Tuple[float, float]] = {}
    for bath in model.baths:
        b = 1 if bath.side == "L" else chain.N
        z = _expect(site_op(space, b, "z"), rho)
        gap = bath.magnetization - z
        qdot = 2.0 * bath.h * bath.lam * gap
        wdot = 2.0 * bath.lam * (chain.h[b - 1] - bath.h) * gap
        if chain.N > 1:
            n = 2 if bath.side == "L" else chain.N - 1
            bond = chain.J_x * site_op(space, b, "x") @ site_op(space, n, "x") + chain.J_y * site_op(
                space, b, "y"
            ) @ site_op(space, n, "y")
            wdot += 2.0 * bath.lam * _expect(bond, rho)
        rates[bath.side] = (wdot, qdot)
    return _record(model, rho, t, rates)


def thermo_record(model: LindbladModel, rho: Operator, t: float = 0.0) -> ThermoRecord:
    """ThermoRecord with the consistent rates."""
    return _record(model, rho, t, consistent_rates(model, rho))


def _record(
    model: LindbladModel, rho: Operator, t: float, rates: Dict[Side, Tuple[float, float]]
) -> ThermoRecord:
    production = entropy_production_rate(model, rho, rates=rates)
    j_s = None
    if model.chain.N > 1 and model.chain.is_xx:
        j_s = spin_current(rho, model.chain.J_x, (1, 2))
    wl, ql = rates.get("L", (0.0, 0.0))
    wr, qr = rates.get("R", (0.0, 0.0))
    return ThermoRecord(
        t=t,
        Wdot_L=wl,
        Wdot_R=wr,
        Qdot_L=ql,
        Qdot_R=qr,
        S=von_neumann_entropy(rho),
        dS_dt=production.dS_dt,
        diS_dt=production.value,
        E_S=_expect(model.h_s, rho),
        dE_dt=_expect(model.h_s, lindblad_rhs(model, rho)),
        j_s=j_s,
        rank_deficient=production.rank_deficient,
    )


def entropy_production_rate(
    model: LindbladModel,
    rho: Operator,
    rates: Optional[Dict[Side, Tuple[float, float]]] = None,
) -> EntropyProductionRate:
    """d_iS/dt = -Tr(D(rho) ln rho) - sum_r beta_r Qdot_r.

    States with an eigenvalue below the floor are evaluated with the floored
    logarithm and flagged.
    """
    rho = hermitize(as_matrix(rho))
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    deficient = min_eig < EIG_FLOOR
    if deficient:
        logger.warning("entropy production on a rank-deficient state (min eigenvalue %.3e)", min_eig)
    rates = rates if rates is not None else consistent_rates(model, rho)
    ds_dt = -float(np.trace(model.dissipation(rho) @ log_psd(rho)).real)
    flux = sum(model.bath(side).beta * qdot for side, (_, qdot) in rates.items())
    return EntropyProductionRate(value=ds_dt - flux, dS_dt=ds_dt, rank_deficient=deficient, min_eigenvalue=min_eig)


def naive_weak_coupling_rates(model: LindbladModel, rho: Operator) -> NaiveRates:
    """Weak-coupling accounting: Qdot_r = Tr(H_S D_r(rho)) against Gibbs states of H_S.

    Diagnostic only; it disagrees with the consistent accounting whenever the
    boundary spin is coupled to the rest of the chain.
    """
    qdot = {d.side: _expect(d.adjoint(model.h_s), rho) for d in model.dissipators}
    ds_dt = -float(np.trace(model.dissipation(rho) @ log_psd(rho)).real)
    dis = ds_dt - sum(model.bath(side).beta * q for side, q in qdot.items())
    return NaiveRates(Qdot=qdot, diS_dt=dis)


def current_operator(space: TensorSpace, sites: Tuple[int, int]) -> Operator:
    """K = sy_j sx_{j+1} - sx_j sy_{j+1}, with j_s = -J <K>."""
    j, k = sites
    if k != j + 1:
        raise StructuralError(f"spin current needs adjacent sites, got {sites}")
    return site_op(space, j, "y") @ site_op(space, k, "x") - site_op(space, j, "x") @ site_op(space, k, "y")


def spin_current(
    rho: Operator, J: float, sites: Tuple[int, int], space: Optional[TensorSpace] = None
) -> float:
    """j_s = i J Y with Y = i <sy_j sx_{j+1} - sx_j sy_{j+1}>.

    Raises:
        ContractError: if the expectation carries an imaginary part above 1e-9.
    """
    rho = as_matrix(rho)
    space = space or system_space(int(round(math.log2(rho.shape[0]))))
    value = complex(np.trace(current_operator(space, sites) @ rho))
    if abs(value.imag) > TOL_IMAG:
        raise ContractError(f"spin current has imaginary residue {value.imag:.3e}")
    return -J * value.real


def local_detailed_balance_residual(model: LindbladModel, side: Side, beta: Optional[float] = None) -> float:
    """||D_r(exp(-beta H_S) / Z)||_F; zero only when the bath alone thermalizes H_S."""
    bath = model.bath(side)
    gibbs = global_gibbs_state(model.h_s, bath.beta if beta is None else beta)
    return frobenius_norm(model.dissipator(side)(gibbs))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= TOL_REGIME * max(abs(a), abs(b))


def classify_regime(record: ThermoRecord, baths: Sequence[BathSpec]) -> RegimeReport:
    """Engine, refrigerator or heater from the two-bath steady state.

    Sides are relabeled so that the hot bath (smaller beta) plays the role of L.
    Engine: beta_hot/beta_cold < h_cold/h_hot < 1, eta = -W/Q_hot <= 1 - beta_hot/beta_cold.
    Refrigerator: h_cold/h_hot < beta_hot/beta_cold, eta = Q_cold/W <= 1/(beta_cold/beta_hot - 1).
    Heater: h_cold/h_hot > 1.
    """
    by_side = {b.side: b for b in baths}
    if set(by_side) != {"L", "R"}:
        raise StructuralError("regime classification needs one bath per side")
    hot, cold = by_side["L"], by_side["R"]
    q_hot, q_cold = record.Qdot_L, record.Qdot_R
    relabeled = hot.beta > cold.beta
    if relabeled:
        hot, cold = cold, hot
        q_hot, q_cold = q_cold, q_hot
    if hot.h is None or cold.h is None:
        raise StructuralError("bath fields must be resolved before classification")

    if _close(hot.beta * hot.h, cold.beta * cold.h):
        return RegimeReport(regime="equilibrium", relabeled=relabeled)
    if _close(hot.h, cold.h):
        return RegimeReport(regime="non-driven", relabeled=relabeled)

    wdot = record.Wdot
    if max(abs(wdot), abs(q_hot), abs(q_cold)) < TOL_RATE:
        return RegimeReport(
            regime="equilibrium", relabeled=relabeled, note="all rates below 1e-12; treated as equilibrium"
        )

    beta_ratio = hot.beta / cold.beta if cold.beta > 0 else 1.0
    h_ratio = cold.h / hot.h if hot.h != 0 else math.inf
    if h_ratio > 1:
        return RegimeReport(regime="heater", relabeled=relabeled)
    if beta_ratio < h_ratio < 1:
        return RegimeReport(regime="engine", eta=-wdot / q_hot, carnot=1.0 - beta_ratio, relabeled=relabeled)
    if beta_ratio >= 1.0:
        return RegimeReport(
            regime="refrigerator",
            eta=q_cold / wdot,
            carnot=math.inf,
            relabeled=relabeled,
            note="equal bath temperatures; the Carnot bound is unbounded",
        )
    carnot = 1.0 / (1.0 / beta_ratio - 1.0) if beta_ratio > 0 else 0.0
    return RegimeReport(regime="refrigerator", eta=q_cold / wdot, carnot=carnot, relabeled=relabeled)
