"""Pydantic models for chain/bath parameters, simulation records and experiment configs."""

import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Side = Literal["L", "R"]
RIScaling = Literal["scaled_V", "fixed_V"]
Regime = Literal["engine", "refrigerator", "heater", "equilibrium", "non-driven"]
ExperimentName = Literal["fig1", "fig2_sweep", "twosite", "convergence", "regime_scan", "ri_trace"]
InitialState = Literal["mixed", "up", "down"]

MAX_SITES = 8


class ChainSpec(BaseModel):
    """XY spin-1/2 chain parameters."""

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., description="Number of sites", ge=1)
    h: Tuple[float, ...] = Field(..., description="Local fields h_1 … h_N")
    J_x: float = Field(default=1.0, description="sx-sx exchange coupling")
    J_y: float = Field(default=1.0, description="sy-sy exchange coupling")

    @model_validator(mode="after")
    def _check_fields(self) -> "ChainSpec":
        if len(self.h) != self.N:
            raise ValueError(f"expected {self.N} local fields, got {len(self.h)}")
        return self

    @classmethod
    def uniform(cls, n: int, h: float = 1.0, J_x: float = 1.0, J_y: float = 1.0) -> "ChainSpec":
        return cls(N=n, h=(h,) * n, J_x=J_x, J_y=J_y)

    @property
    def is_xx(self) -> bool:
        return self.J_x == self.J_y


class BathSpec(BaseModel):
    """One bath: a stream of identical spin copies at inverse temperature beta."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    side: Side = Field(..., description="Which chain end the copies touch")
    beta: float = Field(..., description="Inverse temperature", ge=0)
    h: Optional[float] = Field(None, description="Copy field h_r; defaults to h_1 (L) or h_N (R)")
    lam: float = Field(default=1.0, alias="lambda", description="Coupling rate lambda_r", gt=0)

    def resolve(self, chain: ChainSpec) -> "BathSpec":
        """Fill the copy field from the boundary site when it is not set."""
        if self.h is not None:
            return self
        return self.model_copy(update={"h": chain.h[0] if self.side == "L" else chain.h[-1]})

    @property
    def magnetization(self) -> float:
        if self.h is None:
            raise ValueError(f"bath {self.side} field is unresolved")
        return -math.tanh(0.5 * self.beta * self.h)


class RIConfig(BaseModel):
    """Repeated-interaction (collision model) run parameters."""

    model_config = ConfigDict(frozen=True)

    chain: ChainSpec
    baths: Tuple[BathSpec, ...] = Field(..., min_length=1)
    tau: float = Field(..., description="Collision duration", gt=0)
    steps: int = Field(default=1, description="Number of collisions", ge=1)
    scaling: RIScaling = Field(default="scaled_V", description="scaled_V sets J_r = sqrt(lambda_r / tau)")

    @field_validator("baths")
    @classmethod
    def _unique_sides(cls, baths: Tuple[BathSpec, ...]) -> Tuple[BathSpec, ...]:
        sides = [b.side for b in baths]
        if len(set(sides)) != len(sides):
            raise ValueError(f"at most one bath per side, got {sides}")
        return baths


class CollisionRecord(BaseModel):
    """Bookkeeping of one collision of the system with fresh copies."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., description="Collision index, starting at 1")
    rho_s: np.ndarray = Field(..., description="System state after the collision")
    dW_L: float = 0.0
    dW_R: float = 0.0
    dQ_L: float = 0.0
    dQ_R: float = 0.0
    diS: float = Field(..., description="Entropy production D_term + I_term")
    D_term: float = Field(..., description="Relative entropy D(rho_n' || rho_n) of the copies")
    I_term: float = Field(..., description="Mutual information I(S' : n')")
    dS: float = Field(..., description="System entropy change in the collision")
    E_S: float = Field(..., description="Tr(H_S rho_s) after the collision")
    dE_S: float = Field(..., description="Change of Tr(H_S rho_s) in the collision")
    incoming_work: float = Field(..., description="Tr(V rho_s' ⊗ fresh copies), zero by freshness")
    joint_purity_drift: float = Field(..., description="|Tr(rho_tot'^2) - Tr(rho_tot^2)|")

    @property
    def dW(self) -> float:
        return self.dW_L + self.dW_R

    @property
    def dQ(self) -> float:
        return self.dQ_L + self.dQ_R

    @property
    def first_law_residual(self) -> float:
        return self.dE_S - (self.dW + self.dQ)


class RITrajectory(BaseModel):
    """A run of collisions with cumulative bookkeeping."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tau: float
    initial_state: np.ndarray
    initial_entropy: float
    records: List[CollisionRecord] = Field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.records[-1].rho_s if self.records else self.initial_state

    @property
    def W_L(self) -> float:
        return sum(r.dW_L for r in self.records)

    @property
    def W_R(self) -> float:
        return sum(r.dW_R for r in self.records)

    @property
    def W(self) -> float:
        return self.W_L + self.W_R

    @property
    def Q_L(self) -> float:
        return sum(r.dQ_L for r in self.records)

    @property
    def Q_R(self) -> float:
        return sum(r.dQ_R for r in self.records)

    @property
    def entropy_production(self) -> float:
        return sum(r.diS for r in self.records)

    @property
    def entropy_change(self) -> float:
        return sum(r.dS for r in self.records)


class ThermoRecord(BaseModel):
    """Thermodynamic rates of the Lindblad limit at one instant."""

    t: float = 0.0
    Wdot_L: float = 0.0
    Wdot_R: float = 0.0
    Qdot_L: float = 0.0
    Qdot_R: float = 0.0
    S: float = Field(..., description="von Neumann entropy")
    dS_dt: float = Field(..., description="-Tr(D(rho) ln rho)")
    diS_dt: float = Field(..., description="Entropy production rate")
    E_S: float = Field(..., description="Tr(H_S rho)")
    dE_dt: float = Field(..., description="Tr(H_S rhs(rho))")
    j_s: Optional[float] = Field(None, description="Spin current on bond (1, 2) when defined")
    rank_deficient: bool = False

    @property
    def Wdot(self) -> float:
        return self.Wdot_L + self.Wdot_R

    @property
    def Qdot(self) -> float:
        return self.Qdot_L + self.Qdot_R


class EntropyProductionRate(BaseModel):
    """d_iS/dt with a flag for states below the eigenvalue floor."""

    value: float
    dS_dt: float
    rank_deficient: bool = False
    min_eigenvalue: float


class NaiveRates(BaseModel):
    """Weak-coupling accounting Q_r = Tr(H_S D_r(rho)), kept for diagnostics only."""

    Qdot: Dict[str, float] = Field(default_factory=dict)
    diS_dt: float


class RegimeReport(BaseModel):
    """Operating regime of a two-bath steady state."""

    regime: Regime
    eta: Optional[float] = Field(None, description="-W/Q_L for an engine, Q_R/W for a refrigerator")
    carnot: Optional[float] = Field(None, description="eta_C or eta_C^F")
    relabeled: bool = Field(default=False, description="Sides were swapped so that beta_L <= beta_R")
    note: Optional[str] = None


class CorrelatorState(BaseModel):
    """Two-site correlators; Y = i * y is stored as the real number y."""

    X: float
    y: float
    z1: float
    z2: float

    @property
    def Y(self) -> complex:
        return 1j * self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.y, self.z1, self.z2], dtype=float)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "CorrelatorState":
        x, y, z1, z2 = (float(v) for v in values)
        return cls(X=x, y=y, z1=z1, z2=z2)


class TwoSiteParams(BaseModel):
    """Two-site XX chain with one bath per end and lambda_L = lambda_R."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    J: float = 1.0
    h_L: float = 1.0
    h_R: float = 1.0
    lam: float = Field(default=1.0, alias="lambda", gt=0)
    beta_L: float = Field(default=1.0, ge=0)
    beta_R: float = Field(default=1.0, ge=0)

    @property
    def M_L(self) -> float:
        return -math.tanh(0.5 * self.beta_L * self.h_L)

    @property
    def M_R(self) -> float:
        return -math.tanh(0.5 * self.beta_R * self.h_R)

    def chain(self) -> ChainSpec:
        return ChainSpec(N=2, h=(self.h_L, self.h_R), J_x=self.J, J_y=self.J)

    def baths(self) -> Tuple[BathSpec, BathSpec]:
        return (
            BathSpec(side="L", beta=self.beta_L, h=self.h_L, lam=self.lam),
            BathSpec(side="R", beta=self.beta_R, h=self.h_R, lam=self.lam),
        )


class TwoSiteNess(BaseModel):
    """Closed-form steady state of the two-site chain."""

    j_s: float
    Wdot: float
    Qdot_L: float
    Qdot_R: float
    diS_dt: float
    correlators: CorrelatorState


class OracleReport(BaseModel):
    """Comparison between the correlator ODEs and the full Lindblad engine."""

    rows: List[Dict[str, float]] = Field(default_factory=list)
    max_deviation: float
    ness_js_error: float
    ness_rate_error: float
    work_symmetry_error: float
    passed: bool
    error: Optional[str] = None


class EvolutionResult(BaseModel):
    """Sampled Lindblad trajectory with integrator diagnostics."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: List[float]
    states: List[np.ndarray]
    dt: float
    halvings: int = 0
    max_psd_violation: float = 0.0
    max_trace_drift: float = 0.0
    max_hermiticity_drift: float = 0.0

    @property
    def samples(self) -> List[Tuple[float, np.ndarray]]:
        return list(zip(self.times, self.states))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


class NessResult(BaseModel):
    """Steady state from the Liouvillian null space."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    rho: np.ndarray
    residual: float
    multiplicity: int
    rhs_norm: float
    evolution_distance: Optional[float] = None

    @property
    def unique(self) -> bool:
        return self.multiplicity <= 1


class ConvergenceReport(BaseModel):
    """Distance between collision-model and Lindblad states at a fixed time."""

    taus: List[float]
    errors: List[float]
    slope: float
    running_slopes: List[Optional[float]]
    scaling: RIScaling

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "fig1": {
        "N": 5,
        "h_field": 1.0,
        "baths": ["L"],
        "beta_L": 1.0,
        "h_L": 1.0,
        "lambda_L": 1.0,
        "t_final": 80.0,
        "samples": 161,
        "initial_state": "mixed",
        "variants": {"xx": [1.0, 1.0], "xy": [1.0, 2.0]},
    },
    "fig2_sweep": {
        "N": 5,
        "J_x": 3.0,
        "J_y": 3.0,
        "h": [3.0, 5.0, 5.0, 5.0, 2.0],
        "baths": ["L", "R"],
        "beta_L": 0.8,
        "beta_R": 1.2,
        "lambda_L": 1.0,
        "lambda_R": 1.0,
        "h_L_min": 0.0,
        "h_L_max": 6.0,
        "h_L_points": 25,
    },
    "twosite": {
        "N": 2,
        "J_x": 1.0,
        "J_y": 1.0,
        "h": [1.0, 1.0],
        "baths": ["L", "R"],
        "beta_L": 0.5,
        "beta_R": 2.0,
        "t_final": 20.0,
        "samples": 201,
        "initial_state": "up",
    },
    "convergence": {
        "N": 2,
        "J_x": 1.0,
        "J_y": 1.0,
        "h": [1.0, 1.5],
        "baths": ["L", "R"],
        "beta_L": 0.5,
        "beta_R": 2.0,
        "t_final": 2.0,
        "initial_state": "up",
        "tau_list": [0.1, 0.05, 0.02, 0.01, 0.005],
    },
    "regime_scan": {
        "N": 2,
        "J_x": 1.0,
        "J_y": 1.0,
        "h": [1.0, 1.0],
        "baths": ["L", "R"],
        "draws": 200,
        "seed": 0,
    },
    "ri_trace": {
        "N": 3,
        "J_x": 1.0,
        "J_y": 0.5,
        "h": [1.0, 1.0, 1.0],
        "baths": ["L", "R"],
        "beta_L": 0.5,
        "beta_R": 2.0,
        "tau": 0.05,
        "steps": 200,
        "initial_state": "up",
    },
}


class ExperimentConfig(BaseModel):
    """Flat JSON experiment configuration; keys mirror ChainSpec/BathSpec fields."""

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName = Field(..., description="Which study to run")
    N: int = Field(default=2, description="Number of chain sites", ge=1, le=MAX_SITES)
    h: Optional[List[float]] = Field(None, description="Local fields; uniform h_field when omitted")
    h_field: float = Field(default=1.0, description="Uniform field used when h is omitted")
    J_x: float = Field(default=1.0, description="sx-sx coupling")
    J_y: float = Field(default=1.0, description="sy-sy coupling")
    baths: List[Side] = Field(default_factory=lambda: ["L", "R"], description="Attached bath sides")
    beta_L: float = Field(default=1.0, ge=0)
    beta_R: float = Field(default=1.0, ge=0)
    h_L: Optional[float] = Field(None, description="Left copy field; defaults to h_1")
    h_R: Optional[float] = Field(None, description="Right copy field; defaults to h_N")
    lambda_L: float = Field(default=1.0, gt=0)
    lambda_R: float = Field(default=1.0, gt=0)
    t_final: float = Field(default=20.0, gt=0)
    samples: int = Field(default=201, ge=2, description="Stored time points including t=0")
    dt: Optional[float] = Field(None, gt=0, description="Integrator step; engine default when omitted")
    initial_state: InitialState = "mixed"
    tau: float = Field(default=0.05, gt=0)
    steps: int = Field(default=100, ge=1)
    scaling: RIScaling = "scaled_V"
    tau_list: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.02, 0.01, 0.005])
    h_L_min: float = 0.0
    h_L_max: float = 6.0
    h_L_points: int = Field(default=25, ge=2)
    variants: Dict[str, Tuple[float, float]] = Field(
        default_factory=lambda: {"xx": (1.0, 1.0), "xy": (1.0, 2.0)},
        description="fig1 couplings (J_x, J_y) per variant",
    )
    draws: int = Field(default=200, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _check_ranges(self) -> "ExperimentConfig":
        if self.h is not None and len(self.h) != self.N:
            raise ValueError(f"h has {len(self.h)} entries but N={self.N}")
        if not self.baths:
            raise ValueError("at least one bath side is required")
        if len(set(self.baths)) != len(self.baths):
            raise ValueError(f"duplicate bath sides: {self.baths}")
        if any(t <= 0 for t in self.tau_list):
            raise ValueError("tau_list entries must be positive")
        if self.h_L_max <= self.h_L_min:
            raise ValueError("h_L_max must exceed h_L_min")
        return self

    @classmethod
    def for_experiment(cls, experiment: str, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Merge per-experiment defaults under ``overrides`` and validate."""
        data: Dict[str, Any] = dict(EXPERIMENT_DEFAULTS.get(experiment, {}))
        data.update(overrides or {})
        data["experiment"] = experiment
        return cls(**data)

    def chain(self, J_x: Optional[float] = None, J_y: Optional[float] = None) -> ChainSpec:
        fields = tuple(self.h) if self.h is not None else (self.h_field,) * self.N
        return ChainSpec(
            N=self.N,
            h=fields,
            J_x=self.J_x if J_x is None else J_x,
            J_y=self.J_y if J_y is None else J_y,
        )

    def bath_specs(self) -> List[BathSpec]:
        specs = []
        for side in ("L", "R"):
            if side in self.baths:
                specs.append(
                    BathSpec(
                        side=side,
                        beta=getattr(self, f"beta_{side}"),
                        h=getattr(self, f"h_{side}"),
                        lam=getattr(self, f"lambda_{side}"),
                    )
                )
        return specs


class ExperimentResponse(BaseModel):
    """Response model for an experiment run."""

    data: List[Dict[str, Any]] = Field(default_factory=list, description="CSV rows of the main artifact")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Run metadata and metrics")
    checks: Dict[str, bool] = Field(default_factory=dict, description="Built-in assertion results")
    artifacts: List[str] = Field(default_factory=list, description="Files written")
    success: bool = Field(default=True, description="Whether the run completed and all checks passed")
    error: Optional[str] = Field(None, description="Error message if the run failed")
    error_kind: Optional[Literal["config", "contract"]] = Field(None, description="Failure class")
