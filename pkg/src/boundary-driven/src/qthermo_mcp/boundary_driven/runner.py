"""Experiment runner: reproduces the chain studies and writes CSV and JSON artifacts."""

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np
from dotenv import load_dotenv

from .densemat import frobenius_norm, random_density_matrix
from .errors import ContractError, StructuralError
from .lindblad_engine import (
    MAX_NESS_SITES,
    build_model,
    evolve,
    initial_state,
    liouvillian_matrix,
    ness,
    spin_coupling,
    spin_dissipator,
    superoperator_of,
)
from .models import (
    EXPERIMENT_DEFAULTS,
    BathSpec,
    ChainSpec,
    ExperimentConfig,
    ExperimentResponse,
    RIConfig,
    TwoSiteParams,
)
from .repeated_interaction import CollisionModel, ri_lindblad_convergence, ri_trajectory
from .spin_system import product_thermal_state
from .thermo import (
    classify_regime,
    local_detailed_balance_residual,
    naive_weak_coupling_rates,
    thermo_record,
)
from .twosite_oracle import ness_closed_form, oracle_vs_engine, second_law_grid

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

CSV_COLUMNS: Dict[str, List[str]] = {
    "fig1": ["t", "Wdot", "Qdot_L", "Qdot_R", "diS_dt", "S", "E_S"],
    "ri_trace": ["t", "Wdot", "Qdot_L", "Qdot_R", "diS_dt", "S", "E_S"],
    "fig2_sweep": ["h_L", "Qdot_L", "Qdot_R", "Wdot", "diS_dt", "j_s", "regime", "eta", "naive_diS_dt"],
    "convergence": ["tau", "error", "slope_running"],
    "twosite": ["t", "X", "Y", "z1", "z2", "X_engine", "Y_engine", "z1_engine", "z2_engine", "max_dev"],
    "regime_scan": ["beta_L", "beta_R", "h_L", "h_R", "regime", "eta", "eta_carnot", "eta_expected"],
    "second_law_grid": ["beta_L", "beta_R", "h_L", "h_R", "diS_dt"],
}

SECOND_LAW_BETAS = [0.5, 1.0, 1.5, 2.0, 3.0]
SECOND_LAW_FIELDS = [0.5, 1.0, 1.5, 2.0, 3.0]
DECAY_REFERENCE_TIME = 50.0
SELFTEST_COLLISIONS = 1000


def format_value(value: Any) -> str:
    """12 significant digits for floats, empty cell for missing values."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path: Path, columns: List[str], rows: Iterable[Dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def load_config(
    path: Optional[str], experiment: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """Read a JSON config, apply overrides and per-experiment defaults.

    Raises:
        ValueError: if no experiment is named or the config does not validate.
    """
    data: Dict[str, Any] = {}
    if path:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must hold a JSON object")
    name = experiment or data.pop("experiment", None)
    data.pop("experiment", None)
    if not name:
        raise ValueError("no experiment named in the config or on the command line")
    data.update(overrides or {})
    return ExperimentConfig.for_experiment(name, data)


class ExperimentRunner:
    """Runs the configured studies and collects their artifacts."""

    def __init__(self, output_dir: Optional[str] = None, workers: Optional[int] = None):
        """Initialize the runner.

        Args:
            output_dir: Artifact directory. If not provided, reads QTHERMO_OUTPUT_DIR (default ./out).
            workers: Sweep worker threads. If not provided, reads QTHERMO_WORKERS (default 1).
        """
        self.output_dir = Path(output_dir or os.getenv("QTHERMO_OUTPUT_DIR") or "./out")
        raw = workers if workers is not None else os.getenv("QTHERMO_WORKERS", "1")
        try:
            self.workers = int(raw)
        except (TypeError, ValueError):
            raise ValueError(f"QTHERMO_WORKERS must be a positive integer, got {raw!r}") from None
        if self.workers < 1:
            raise ValueError(f"QTHERMO_WORKERS must be a positive integer, got {raw!r}")

    def _workers(self, config: ExperimentConfig) -> int:
        return config.workers if "workers" in config.model_fields_set else self.workers

    def _map(self, fn: Callable, items: List[Any], workers: int) -> List[Any]:
        """Evaluate ``fn`` over ``items``, results in input order."""
        if workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def run(self, config: ExperimentConfig) -> ExperimentResponse:
        """Run one experiment and write its summary.

        Args:
            config: Validated experiment configuration

        Returns:
            ExperimentResponse with rows, checks and artifact paths, or the error
        """
        dispatch = {
            "fig1": self.run_fig1,
            "fig2_sweep": self.run_fig2_sweep,
            "twosite": self.run_twosite,
            "convergence": self.run_convergence,
            "regime_scan": self.run_regime_scan,
            "ri_trace": self.run_ri_trace,
        }
        out_dir = Path(config.output) if config.output else self.output_dir
        metadata = {"experiment": config.experiment}
        logger.info("running %s into %s", config.experiment, out_dir)
        try:
            response = dispatch[config.experiment](config, out_dir)
        except ContractError as e:
            logger.error("%s: contract violation: %s", config.experiment, e)
            return ExperimentResponse(metadata=metadata, success=False, error=str(e), error_kind="contract")
        except ValueError as e:
            return ExperimentResponse(metadata=metadata, success=False, error=str(e), error_kind="config")
        except Exception as e:
            return ExperimentResponse(metadata=metadata, success=False, error=str(e))

        response.metadata = {**metadata, **response.metadata}
        summary = out_dir / "summary.json"
        summary.parent.mkdir(parents=True, exist_ok=True)
        summary.write_text(
            json.dumps(
                {
                    "experiment": config.experiment,
                    "checks": response.checks,
                    "passed": response.success,
                    "metrics": response.metadata,
                    "artifacts": response.artifacts,
                },
                indent=2,
            )
        )
        response.artifacts.append(str(summary))
        failed = [name for name, ok in response.checks.items() if not ok]
        if failed:
            logger.warning("%s: failed checks %s", config.experiment, failed)
        logger.info("%s finished, artifacts: %s", config.experiment, response.artifacts)
        return response

    def _response(
        self,
        data: List[Dict[str, Any]],
        checks: Dict[str, bool],
        metadata: Dict[str, Any],
        artifacts: List[str],
    ) -> ExperimentResponse:
        failed = [name for name, ok in checks.items() if not ok]
        return ExperimentResponse(
            data=data,
            metadata=metadata,
            checks=checks,
            artifacts=artifacts,
            success=not failed,
            error=f"failed checks: {', '.join(failed)}" if failed else None,
            error_kind="contract" if failed else None,
        )

    def run_fig1(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """Single left bath on an N-site chain, one time series per coupling variant."""
        baths = config.bath_specs()
        rho0 = initial_state(config.N, config.initial_state)
        data: List[Dict[str, Any]] = []
        checks: Dict[str, bool] = {}
        metadata: Dict[str, Any] = {}
        artifacts: List[str] = []

        for name, (j_x, j_y) in config.variants.items():
            chain = config.chain(j_x, j_y)
            model = build_model(chain, baths)
            trajectory = evolve(model, rho0, config.t_final, dt=config.dt, samples=config.samples)
            records = [thermo_record(model, rho, t) for t, rho in trajectory.samples]
            rows = [
                {
                    "variant": name,
                    "t": r.t,
                    "Wdot": r.Wdot,
                    "Qdot_L": r.Qdot_L,
                    "Qdot_R": r.Qdot_R,
                    "diS_dt": r.diS_dt,
                    "S": r.S,
                    "E_S": r.E_S,
                }
                for r in records
            ]
            path = out_dir / f"fig1_{name}.csv"
            write_csv(path, CSV_COLUMNS["fig1"], rows)
            artifacts.append(str(path))
            data.extend(rows)

            final = records[-1]
            checks[f"{name}_first_law"] = all(
                abs(r.Wdot + r.Qdot - r.dE_dt) <= 1e-9 * max(1.0, abs(r.dE_dt)) for r in records
            )
            checks[f"{name}_second_law"] = min(r.diS_dt for r in records) >= -1e-9
            metadata[name] = {
                "J_x": j_x,
                "J_y": j_y,
                "final_Wdot": final.Wdot,
                "final_Qdot": final.Qdot,
                "final_diS_dt": final.diS_dt,
                "max_psd_violation": trajectory.max_psd_violation,
                "halvings": trajectory.halvings,
            }
            steady = steady_record = None
            if chain.N <= MAX_NESS_SITES:
                steady = ness(model, method="svd")
                steady_record = thermo_record(model, steady.rho)
                metadata[name]["ness_Wdot"] = steady_record.Wdot
                metadata[name]["ness_diS_dt"] = steady_record.diS_dt
                metadata[name]["ness_multiplicity"] = steady.multiplicity
            else:
                metadata[name]["ness"] = f"skipped: dense steady state limited to N <= {MAX_NESS_SITES}"

            single_bath = len(model.baths) == 1
            uniform = len(set(chain.h)) == 1 and all(b.h == chain.h[0] for b in model.baths)
            if single_bath and chain.is_xx and uniform:
                bath = model.baths[0]
                gibbs = product_thermal_state(chain.N, bath.beta, bath.h)
                distance = frobenius_norm(trajectory.final - gibbs)
                k = min(range(len(records)), key=lambda i: abs(records[i].t - DECAY_REFERENCE_TIME))
                reference, reference_rho = records[k], trajectory.states[k]
                metadata[name]["distance_to_gibbs"] = distance
                metadata[name]["decay_checked_at"] = final.t
                metadata[name]["decay_reference"] = {
                    "t": reference.t,
                    "max_rate": max(abs(reference.Wdot), abs(reference.Qdot), abs(reference.diS_dt)),
                    "distance_to_gibbs": frobenius_norm(reference_rho - gibbs),
                    "note": (
                        f"values at the sample nearest t={DECAY_REFERENCE_TIME:g}; from the mixed start the "
                        "default chain is still about 1e-6 away there, so decay and gibbs checks use t_final"
                    ),
                }
                checks[f"{name}_decay"] = max(abs(final.Wdot), abs(final.Qdot), abs(final.diS_dt)) < 1e-6
                gibbs_ok = distance < 1e-6
                if steady is not None:
                    metadata[name]["ness_distance_to_gibbs"] = frobenius_norm(steady.rho - gibbs)
                    gibbs_ok = gibbs_ok and metadata[name]["ness_distance_to_gibbs"] < 1e-6
                checks[f"{name}_gibbs"] = gibbs_ok
            elif single_bath and steady_record is not None:
                bath = model.baths[0]
                ratio_error = abs(steady_record.diS_dt - bath.beta * steady_record.Wdot)
                checks[f"{name}_plateau"] = (
                    steady_record.diS_dt > 0
                    and ratio_error <= 1e-8 * max(1.0, abs(steady_record.diS_dt))
                    and abs(final.diS_dt - steady_record.diS_dt) <= 1e-4 * max(1.0, abs(steady_record.diS_dt))
                )

        return self._response(data, checks, metadata, artifacts)

    def _fig2_point(self, config: ExperimentConfig, h_left: float):
        fields = list(config.chain().h)
        fields[0] = h_left
        chain = config.chain().model_copy(update={"h": tuple(fields)})
        baths = []
        for bath in config.bath_specs():
            if bath.side == "L":
                bath = bath.model_copy(update={"h": h_left})
            baths.append(bath)
        model = build_model(chain, baths)
        rho = ness(model).rho
        record = thermo_record(model, rho)
        report = classify_regime(record, model.baths) if len(model.baths) == 2 else None
        naive = naive_weak_coupling_rates(model, rho)
        return {
            "h_L": h_left,
            "Qdot_L": record.Qdot_L,
            "Qdot_R": record.Qdot_R,
            "Wdot": record.Wdot,
            "diS_dt": record.diS_dt,
            "j_s": record.j_s,
            "regime": report.regime if report else None,
            "eta": report.eta if report else None,
            "naive_diS_dt": naive.diS_dt,
        }

    def run_fig2_sweep(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """NESS quantities against h_L = h_1 for the two-bath chain."""
        if set(config.baths) != {"L", "R"}:
            raise StructuralError("fig2_sweep needs baths on both sides")
        if config.N > MAX_NESS_SITES:
            raise StructuralError(f"fig2_sweep needs the dense steady state, N <= {MAX_NESS_SITES}")
        grid = [float(h) for h in np.linspace(config.h_L_min, config.h_L_max, config.h_L_points)]
        rows = self._map(lambda h: self._fig2_point(config, h), grid, self._workers(config))
        path = out_dir / "fig2_sweep.csv"
        write_csv(path, CSV_COLUMNS["fig2_sweep"], rows)

        right = config.bath_specs()[-1].resolve(config.chain())
        h_equilibrium = right.beta * right.h / config.beta_L
        equilibrium = self._fig2_point(config, h_equilibrium)
        non_driven = self._fig2_point(config, right.h)
        checks = {
            "second_law": min(r["diS_dt"] for r in rows) >= -1e-9,
            "first_law": all(abs(r["Wdot"] + r["Qdot_L"] + r["Qdot_R"]) < 1e-8 for r in rows),
            "equilibrium_point_vanishes": max(
                abs(equilibrium[k]) for k in ("Qdot_L", "Qdot_R", "Wdot", "diS_dt")
            )
            < 1e-8,
            "non_driven_point": abs(non_driven["Wdot"]) < 1e-8
            and abs(non_driven["Qdot_L"] + non_driven["Qdot_R"]) < 1e-8,
        }
        metadata = {
            "h_L_equilibrium": h_equilibrium,
            "h_L_non_driven": right.h,
            "equilibrium_point": equilibrium,
            "non_driven_point": non_driven,
            "naive_negative_count": sum(1 for r in rows if r["naive_diS_dt"] < -1e-9),
            "naive_min_diS_dt": min(r["naive_diS_dt"] for r in rows),
        }
        return self._response(rows, checks, metadata, [str(path)])

    def _two_site_params(self, config: ExperimentConfig) -> TwoSiteParams:
        chain = config.chain()
        if chain.N != 2 or not chain.is_xx:
            raise StructuralError("the two-site oracle needs N=2 and J_x == J_y")
        if set(config.baths) != {"L", "R"}:
            raise StructuralError("the two-site oracle needs baths on both sides")
        if config.lambda_L != config.lambda_R:
            raise StructuralError("the two-site oracle needs lambda_L == lambda_R")
        for given, site in ((config.h_L, chain.h[0]), (config.h_R, chain.h[1])):
            if given is not None and given != site:
                raise StructuralError("the two-site oracle ties the copy fields to h_1 and h_2")
        return TwoSiteParams(
            J=chain.J_x,
            h_L=chain.h[0],
            h_R=chain.h[1],
            lam=config.lambda_L,
            beta_L=config.beta_L,
            beta_R=config.beta_R,
        )

    def run_twosite(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """Correlator ODEs and closed forms against the Lindblad engine."""
        params = self._two_site_params(config)
        rho0 = initial_state(2, config.initial_state)
        report = oracle_vs_engine(params, rho0, config.t_final, config.samples)
        closed = ness_closed_form(params)
        path = out_dir / "twosite.csv"
        write_csv(path, CSV_COLUMNS["twosite"], report.rows)
        checks = {
            "transient_agreement": report.max_deviation <= 1e-6,
            "ness_agreement": max(report.ness_js_error, report.ness_rate_error) <= 1e-8,
            "work_symmetry": report.work_symmetry_error <= 1e-8,
            "second_law": closed.diS_dt >= -1e-9,
        }
        metadata = {
            "closed_form": closed.model_dump(),
            "max_deviation": report.max_deviation,
            "ness_js_error": report.ness_js_error,
            "ness_rate_error": report.ness_rate_error,
        }
        return self._response(report.rows, checks, metadata, [str(path)])

    def run_convergence(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """Collision model against the Lindblad limit as tau shrinks."""
        chain = config.chain()
        baths = config.bath_specs()
        rho0 = initial_state(config.N, config.initial_state)
        reference = evolve(build_model(chain, baths), rho0, config.t_final, dt=config.dt, samples=2).final
        workers = self._workers(config)
        scaled = ri_lindblad_convergence(
            rho0, chain, baths, config.t_final, config.tau_list, "scaled_V", workers, reference
        )
        fixed = ri_lindblad_convergence(
            rho0, chain, baths, config.t_final, config.tau_list, "fixed_V", workers, reference
        )
        rows = [
            {"tau": tau, "error": err, "slope_running": slope}
            for tau, err, slope in zip(scaled.taus, scaled.errors, scaled.running_slopes)
        ]
        path = out_dir / "convergence.csv"
        write_csv(path, CSV_COLUMNS["convergence"], rows)
        checks = {
            "monotone": scaled.monotone,
            "slope": scaled.slope >= 0.45,
            "fixed_V_plateau": fixed.errors[-1] > 0.5 * fixed.errors[0] and fixed.errors[-1] > scaled.errors[-1],
        }
        metadata = {"slope": scaled.slope, "fixed_V_errors": fixed.errors, "fixed_V_slope": fixed.slope}
        return self._response(rows, checks, metadata, [str(path)])

    def _draw_regime(self, rng: np.random.Generator, regime: str) -> TwoSiteParams:
        beta_l = rng.uniform(0.2, 2.0)
        beta_r = beta_l * rng.uniform(1.2, 4.0)
        ratio = beta_l / beta_r
        h_l = rng.uniform(0.5, 5.0)
        if regime == "engine":
            h_r = h_l * (ratio + (1.0 - ratio) * rng.uniform(0.05, 0.95))
        else:
            h_r = h_l * ratio * rng.uniform(0.05, 0.95)
        return TwoSiteParams(J=1.0, h_L=h_l, h_R=h_r, lam=1.0, beta_L=beta_l, beta_R=beta_r)

    def run_regime_scan(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """Random engine and refrigerator draws for the two-site chain plus a second-law grid."""
        rng = np.random.default_rng(config.seed)
        draws = [(kind, self._draw_regime(rng, kind)) for kind in ("engine", "refrigerator") for _ in range(config.draws)]

        def evaluate(item):
            kind, params = item
            model = build_model(params.chain(), params.baths())
            rho = ness(model).rho
            record = thermo_record(model, rho)
            report = classify_regime(record, model.baths)
            if kind == "engine":
                expected = 1.0 - params.h_R / params.h_L
            else:
                expected = 1.0 / (params.h_L / params.h_R - 1.0)
            naive = naive_weak_coupling_rates(model, rho)
            return kind, {
                "beta_L": params.beta_L,
                "beta_R": params.beta_R,
                "h_L": params.h_L,
                "h_R": params.h_R,
                "regime": report.regime,
                "eta": report.eta,
                "eta_carnot": report.carnot,
                "eta_expected": expected,
            }, naive.diS_dt

        results = self._map(evaluate, draws, self._workers(config))
        rows = [row for _, row, _ in results]

        def within(kind: str, test: Callable[[Dict[str, Any]], bool]) -> bool:
            return all(test(row) for k, row, _ in results if k == kind)

        grid = second_law_grid(SECOND_LAW_BETAS, SECOND_LAW_FIELDS, use_engine=True)
        on_surface = [r for r in grid if r["beta_L"] * r["h_L"] == r["beta_R"] * r["h_R"]]
        checks = {
            "engine_classified": within("engine", lambda r: r["regime"] == "engine"),
            "engine_efficiency": within("engine", lambda r: abs(r["eta"] - r["eta_expected"]) <= 1e-8),
            "engine_carnot": within("engine", lambda r: r["eta"] <= r["eta_carnot"] + 1e-9),
            "refrigerator_classified": within("refrigerator", lambda r: r["regime"] == "refrigerator"),
            "refrigerator_efficiency": within(
                "refrigerator", lambda r: abs(r["eta"] - r["eta_expected"]) <= 1e-8 * max(1.0, r["eta_expected"])
            ),
            "refrigerator_carnot": within("refrigerator", lambda r: r["eta"] <= r["eta_carnot"] + 1e-9),
            "second_law_grid": min(r["diS_dt"] for r in grid) >= -1e-9,
            "second_law_zero_on_surface": bool(on_surface) and all(abs(r["diS_dt"]) <= 1e-9 for r in on_surface),
        }
        naive = [value for _, _, value in results]
        metadata = {
            "draws": config.draws,
            "seed": config.seed,
            "naive_negative_count": sum(1 for v in naive if v < -1e-9),
            "naive_min_diS_dt": min(naive),
            "grid_points": len(grid),
            "grid_surface_points": len(on_surface),
        }
        path = out_dir / "regime_scan.csv"
        grid_path = out_dir / "second_law_grid.csv"
        write_csv(path, CSV_COLUMNS["regime_scan"], rows)
        write_csv(grid_path, CSV_COLUMNS["second_law_grid"], grid)
        return self._response(rows, checks, metadata, [str(path), str(grid_path)])

    def run_ri_trace(self, config: ExperimentConfig, out_dir: Path) -> ExperimentResponse:
        """Per-collision bookkeeping of the exact collision model."""
        ri_config = RIConfig(
            chain=config.chain(),
            baths=tuple(config.bath_specs()),
            tau=config.tau,
            steps=config.steps,
            scaling=config.scaling,
        )
        rho0 = initial_state(config.N, config.initial_state)
        trajectory = ri_trajectory(rho0, ri_config)
        tau = config.tau
        rows = [
            {
                "t": r.n * tau,
                "Wdot": r.dW / tau,
                "Qdot_L": r.dQ_L / tau,
                "Qdot_R": r.dQ_R / tau,
                "diS_dt": r.diS / tau,
                "S": trajectory.initial_entropy + sum(x.dS for x in trajectory.records[: r.n]),
                "E_S": r.E_S,
            }
            for r in trajectory.records
        ]
        path = out_dir / "ri_trace.csv"
        write_csv(path, CSV_COLUMNS["ri_trace"], rows)

        betas = {b.side: b.beta for b in ri_config.baths}
        flux = betas.get("L", 0.0) * trajectory.Q_L + betas.get("R", 0.0) * trajectory.Q_R
        balance = abs(trajectory.entropy_change - flux - trajectory.entropy_production)
        records = trajectory.records
        checks = {
            "first_law": all(abs(r.first_law_residual) <= 1e-10 * max(1.0, abs(r.E_S)) for r in records),
            "entropy_production_nonnegative": all(
                r.diS >= -1e-10 and r.D_term >= -1e-10 and r.I_term >= -1e-10 for r in records
            ),
            "entropy_balance": balance <= 1e-8,
            "fresh_copies": all(abs(r.incoming_work) <= 1e-10 for r in records),
            "joint_purity": all(r.joint_purity_drift <= 1e-10 for r in records),
        }
        metadata = {
            "W": trajectory.W,
            "Q_L": trajectory.Q_L,
            "Q_R": trajectory.Q_R,
            "entropy_production": trajectory.entropy_production,
            "entropy_change": trajectory.entropy_change,
            "entropy_balance_residual": balance,
        }
        return self._response(rows, checks, metadata, [str(path)])

    def selftest(self, seed: int = 0) -> ExperimentResponse:
        """Invariant suites that need no config or output directory."""
        rng = np.random.default_rng(seed)
        checks: Dict[str, bool] = {}
        metadata: Dict[str, Any] = {}
        try:
            # microscopic and channel dissipators agree as superoperators
            worst = 0.0
            chain = ChainSpec.uniform(2)
            for beta in (0.0, 0.5, 2.0):
                for h in (0.0, 1.0, 2.5):
                    for lam in (0.3, 1.0):
                        for side in ("L", "R"):
                            bath = BathSpec(side=side, beta=beta, h=h, lam=lam)
                            micro = superoperator_of(spin_coupling(chain, bath), 4)
                            explicit = spin_dissipator(bath, 2).superoperator()
                            worst = max(worst, frobenius_norm(micro - explicit))
            checks["dissipator_equivalence"] = worst < 1e-12
            metadata["dissipator_equivalence_error"] = worst

            params = TwoSiteParams(J=1.0, h_L=1.0, h_R=1.0, lam=1.0, beta_L=0.5, beta_R=2.0)
            model = build_model(params.chain(), params.baths())
            record = thermo_record(model, ness(model).rho)
            closed = ness_closed_form(params)
            checks["twosite_closed_form"] = abs(record.j_s - closed.j_s) < 1e-8 and abs(record.diS_dt - closed.diS_dt) < 1e-8
            metadata["twosite_j_s"] = record.j_s

            worst = 0.0
            worst_negative = 0.0
            for _ in range(SELFTEST_COLLISIONS):
                n = int(rng.integers(1, 4))
                sides = [["L"], ["R"], ["L", "R"]][int(rng.integers(0, 3))]
                config = RIConfig(
                    chain=ChainSpec(
                        N=n,
                        h=tuple(rng.uniform(-2.0, 2.0, size=n)),
                        J_x=float(rng.uniform(-1.5, 1.5)),
                        J_y=float(rng.uniform(-1.5, 1.5)),
                    ),
                    baths=tuple(
                        BathSpec(side=s, beta=float(rng.uniform(0.0, 3.0)), lam=float(rng.uniform(0.2, 2.0)))
                        for s in sides
                    ),
                    tau=float(rng.uniform(0.01, 0.5)),
                    scaling=("scaled_V", "fixed_V")[int(rng.integers(0, 2))],
                )
                rec = CollisionModel(config).step(random_density_matrix(2**n, rng))
                worst = max(worst, abs(rec.first_law_residual) / max(1.0, abs(rec.E_S)))
                worst_negative = min(worst_negative, rec.D_term, rec.I_term)
            checks["collision_first_law"] = worst <= 1e-10
            metadata["collision_first_law_residual"] = worst
            checks["collision_entropy_terms"] = worst_negative >= -1e-10
            metadata["collision_configurations"] = SELFTEST_COLLISIONS
            metadata["collision_min_entropy_term"] = worst_negative

            grid = second_law_grid(SECOND_LAW_BETAS, SECOND_LAW_FIELDS)
            checks["second_law_grid"] = min(r["diS_dt"] for r in grid) >= -1e-9

            chain = ChainSpec.uniform(3)
            model = build_model(chain, [BathSpec(side="L", beta=1.0)])
            lhat = liouvillian_matrix(model)
            trace_row = np.eye(8).reshape(-1, order="F").conj() @ lhat
            checks["liouvillian_trace_preserving"] = float(np.max(np.abs(trace_row))) < 1e-12
            metadata["local_detailed_balance_residual"] = local_detailed_balance_residual(model, "L")
            checks["no_global_detailed_balance"] = metadata["local_detailed_balance_residual"] > 1e-6
        except (ContractError, ValueError) as e:
            return ExperimentResponse(
                metadata={"experiment": "selftest", **metadata},
                checks=checks,
                success=False,
                error=str(e),
                error_kind="contract" if isinstance(e, ContractError) else "config",
            )
        response = self._response([], checks, {"experiment": "selftest", **metadata}, [])
        return response

    @staticmethod
    def list_experiments() -> Dict[str, Dict[str, Any]]:
        """Experiment names with their default parameters."""
        return {name: dict(defaults) for name, defaults in EXPERIMENT_DEFAULTS.items()}
