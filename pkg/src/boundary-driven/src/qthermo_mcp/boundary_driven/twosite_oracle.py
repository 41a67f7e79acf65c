"""Exact solution of the two-site XX chain between two spin baths.

Four correlators close under the dynamics:
X = <sx1 sx2 + sy1 sy2>, y = <sy1 sx2 - sx1 sy2> (so Y = i y), z1 = <sz1>, z2 = <sz2>.
"""

import itertools
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .densemat import Operator, spectral_norm
from .lindblad_engine import build_model, evolve, ness, rk4_step, segment_grid
from .models import CorrelatorState, OracleReport, TwoSiteNess, TwoSiteParams
from .spin_system import chain_hamiltonian, site_op, system_space
from .thermo import consistent_rates, current_operator, thermo_record

logger = logging.getLogger(__name__)

TOL_TRANSIENT = 1e-6
TOL_NESS = 1e-8


def _observables() -> Dict[str, Operator]:
    space = system_space(2)
    return {
        "X": site_op(space, 1, "x") @ site_op(space, 2, "x") + site_op(space, 1, "y") @ site_op(space, 2, "y"),
        "y": current_operator(space, (1, 2)),
        "z1": site_op(space, 1, "z"),
        "z2": site_op(space, 2, "z"),
    }


OBSERVABLES = _observables()


def correlator_rhs(s: CorrelatorState, params: TwoSiteParams) -> CorrelatorState:
    """Time derivative of (X, y, z1, z2)."""
    lam, J = params.lam, params.J
    u = params.h_L - params.h_R
    return CorrelatorState(
        X=-u * s.y - 4 * lam * s.X,
        y=u * s.X + 4 * J * (s.z1 - s.z2) - 4 * lam * s.y,
        z1=4 * lam * (params.M_L - s.z1) - 2 * J * s.y,
        z2=4 * lam * (params.M_R - s.z2) + 2 * J * s.y,
    )


def correlators_from_state(rho: Operator) -> CorrelatorState:
    values = {name: float(np.trace(op @ rho).real) for name, op in OBSERVABLES.items()}
    return CorrelatorState(**values)


def default_step(params: TwoSiteParams) -> float:
    """Engine step policy: 0.01 / max(lambda, ||H_S||_2)."""
    scale = max(params.lam, spectral_norm(chain_hamiltonian(params.chain())))
    return 0.01 / scale if scale > 0 else 0.01


def integrate_correlators(
    params: TwoSiteParams,
    s0: CorrelatorState,
    t_final: float,
    samples: int = 201,
    dt: Optional[float] = None,
) -> Tuple[List[float], List[CorrelatorState]]:
    """RK4 on the four-correlator system with the engine's sampling grid."""
    seg, steps = segment_grid(t_final, samples, dt or default_step(params))
    h = seg / steps

    def rhs(values: np.ndarray) -> np.ndarray:
        return correlator_rhs(CorrelatorState.from_array(values), params).as_array()

    times, states = [0.0], [s0]
    y = s0.as_array()
    for k in range(samples - 1):
        for _ in range(steps):
            y = rk4_step(rhs, y, h)
        times.append((k + 1) * seg)
        states.append(CorrelatorState.from_array(y))
    return times, states


def ness_correlators(params: TwoSiteParams) -> CorrelatorState:
    """Stationary correlators; y = 16 lambda J (M_L - M_R) / ((h_L - h_R)^2 + 16 J^2 + 16 lambda^2)."""
    lam, J = params.lam, params.J
    u = params.h_L - params.h_R
    y = 16 * lam * J * (params.M_L - params.M_R) / (u**2 + 16 * J**2 + 16 * lam**2)
    return CorrelatorState(
        X=-u * y / (4 * lam),
        y=y,
        z1=params.M_L - J * y / (2 * lam),
        z2=params.M_R + J * y / (2 * lam),
    )


def ness_closed_form(params: TwoSiteParams) -> TwoSiteNess:
    """j_s = 16 lambda J^2 (M_R - M_L) / ((h_L - h_R)^2 + 16 J^2 + 16 lambda^2) and the rates it fixes."""
    lam, J = params.lam, params.J
    u = params.h_L - params.h_R
    j_s = 16 * lam * J**2 * (params.M_R - params.M_L) / (u**2 + 16 * J**2 + 16 * lam**2)
    return TwoSiteNess(
        j_s=j_s,
        Wdot=u * j_s,
        Qdot_L=-params.h_L * j_s,
        Qdot_R=params.h_R * j_s,
        diS_dt=(params.beta_L * params.h_L - params.beta_R * params.h_R) * j_s,
        correlators=ness_correlators(params),
    )


def oracle_vs_engine(
    params: TwoSiteParams,
    rho0: Operator,
    t_final: float = 20.0,
    samples: int = 201,
    tol_transient: float = TOL_TRANSIENT,
    tol_ness: float = TOL_NESS,
) -> OracleReport:
    """Compare correlator ODEs and closed forms against the Lindblad engine."""
    model = build_model(params.chain(), params.baths())
    trajectory = evolve(model, rho0, t_final, samples=samples)
    times, oracle = integrate_correlators(params, correlators_from_state(rho0), t_final, samples)

    rows: List[Dict[str, float]] = []
    max_dev = 0.0
    symmetry = 0.0
    for t, s, rho in zip(times, oracle, trajectory.states):
        e = correlators_from_state(rho)
        dev = float(np.max(np.abs(s.as_array() - e.as_array())))
        max_dev = max(max_dev, dev)
        rows.append(
            {
                "t": t,
                "X": s.X,
                "Y": s.y,
                "z1": s.z1,
                "z2": s.z2,
                "X_engine": e.X,
                "Y_engine": e.y,
                "z1_engine": e.z1,
                "z2_engine": e.z2,
                "max_dev": dev,
            }
        )
        rates = consistent_rates(model, rho)
        expected = 2 * params.lam * params.J * e.X
        symmetry = max(symmetry, abs(rates["L"][0] - expected), abs(rates["R"][0] - expected))

    steady = ness(model)
    record = thermo_record(model, steady.rho)
    closed = ness_closed_form(params)
    js_error = abs(record.j_s - closed.j_s)
    rate_error = max(
        abs(record.Wdot - closed.Wdot),
        abs(record.Qdot_L - closed.Qdot_L),
        abs(record.Qdot_R - closed.Qdot_R),
        abs(record.diS_dt - closed.diS_dt),
    )

    failures = []
    if max_dev > tol_transient:
        failures.append(f"transient deviation {max_dev:.3e} > {tol_transient:g}")
    if max(js_error, rate_error) > tol_ness:
        failures.append(f"NESS deviation {max(js_error, rate_error):.3e} > {tol_ness:g}")
    if symmetry > tol_ness:
        failures.append(f"Wdot_L = 2 lambda J X = Wdot_R violated by {symmetry:.3e}")
    if failures:
        logger.warning("oracle comparison failed: %s", "; ".join(failures))
    return OracleReport(
        rows=rows,
        max_deviation=max_dev,
        ness_js_error=js_error,
        ness_rate_error=rate_error,
        work_symmetry_error=symmetry,
        passed=not failures,
        error="; ".join(failures) or None,
    )


def second_law_grid(
    betas: Iterable[float],
    fields: Iterable[float],
    J: float = 1.0,
    lam: float = 1.0,
    use_engine: bool = False,
) -> List[Dict[str, float]]:
    """d_iS/dt on every (beta_L, beta_R, h_L, h_R) combination.

    With ``use_engine`` the value comes from the Liouvillian steady state and the
    consistent rates instead of the closed form.
    """
    betas, fields = list(betas), list(fields)
    rows = []
    for beta_l, beta_r, h_l, h_r in itertools.product(betas, betas, fields, fields):
        params = TwoSiteParams(J=J, h_L=h_l, h_R=h_r, lam=lam, beta_L=beta_l, beta_R=beta_r)
        if use_engine:
            model = build_model(params.chain(), params.baths())
            value = thermo_record(model, ness(model).rho).diS_dt
        else:
            value = ness_closed_form(params).diS_dt
        rows.append({"beta_L": beta_l, "beta_R": beta_r, "h_L": h_l, "h_R": h_r, "diS_dt": value})
    return rows
