import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    computed_field,
    field_validator,
    model_validator,
)
from scipy.constants import hbar

from mirrorsim.config import settings
from mirrorsim.errors import NumericalError

TWO_PI = 2.0 * math.pi


# Tags
class OperatorKind(str, Enum):
    ANNIHILATION = "annihilation"
    CREATION = "creation"
    POSITION = "position"
    HAMILTONIAN_A = "hamiltonian-A"
    HAMILTONIAN_B = "hamiltonian-B"
    GENERAL = "general"


class CurveMethod(str, Enum):
    EXACT = "exact"
    QM_ONLY = "qm-only"
    HEURISTIC = "heuristic"
    MASTER_FULL = "master-full"
    MASTER_OD = "master-od"
    UNRAVEL_LINEAR = "unravel-linear"
    UNRAVEL_QMUPL = "unravel-qmupl"

    @property
    def closed_form(self) -> bool:
        return self in (CurveMethod.EXACT, CurveMethod.QM_ONLY, CurveMethod.HEURISTIC)

    @property
    def stochastic(self) -> bool:
        return self in (CurveMethod.UNRAVEL_LINEAR, CurveMethod.UNRAVEL_QMUPL)


class IntegratorScheme(str, Enum):
    FIXED_RK4 = "fixed-rk4"
    RK4_STEP_DOUBLING = "rk4-step-doubling"


class NoiseScheme(str, Enum):
    EULER_MARUYAMA = "euler-maruyama"


class LinearSampling(str, Enum):
    """Path measure the linear-unraveling noise is drawn from."""

    TILTED = "tilted"
    REFERENCE = "reference"


class ModelTag(str, Enum):
    GRW = "GRW"
    QMUPL = "QMUPL"
    CSL = "CSL"
    DIRECT = "direct"


class SweepKind(str, Enum):
    TRUNCATION = "truncation"
    STEP = "step"


# Parameter schemas
class PhysicalParams(BaseModel):
    """SI parameters of the interferometer experiment.

    `sigma` may be derived from `mass`, and `kappa`/`coupling_G` from each other.
    `omega_c` is kept for documentation; the photon phase cancels in f.
    """

    model_config = ConfigDict(frozen=True)

    omega_c: Optional[PositiveFloat] = None
    omega_m: PositiveFloat
    mass: Optional[PositiveFloat] = None
    sigma: Optional[PositiveFloat] = None
    coupling_G: Optional[NonNegativeFloat] = None
    kappa: Optional[NonNegativeFloat] = None
    eta: NonNegativeFloat = 0.0

    @model_validator(mode="before")
    @classmethod
    def fill_derived(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        omega_m = data.get("omega_m")
        if omega_m is None:
            return data
        omega_m = float(omega_m)
        if data.get("sigma") is None and data.get("mass") is not None:
            data["sigma"] = math.sqrt(hbar / (2.0 * float(data["mass"]) * omega_m))
        if data.get("kappa") is None and data.get("coupling_G") is not None:
            data["kappa"] = float(data["coupling_G"]) / omega_m
        if data.get("coupling_G") is None and data.get("kappa") is not None:
            data["coupling_G"] = float(data["kappa"]) * omega_m
        return data

    @model_validator(mode="after")
    def check_consistency(self) -> "PhysicalParams":
        if self.sigma is None:
            raise ValueError("either sigma or mass is required")
        if self.kappa is None:
            raise ValueError("either kappa or coupling_G is required")
        if not math.isclose(self.kappa, self.coupling_G / self.omega_m, rel_tol=1e-12):
            raise ValueError("kappa must equal coupling_G / omega_m")
        if self.mass is not None:
            expected = math.sqrt(hbar / (2.0 * self.mass * self.omega_m))
            if not math.isclose(self.sigma, expected, rel_tol=1e-9):
                raise ValueError(f"sigma {self.sigma:.6e} m inconsistent with mass (expected {expected:.6e} m)")
        return self

    @property
    def ell(self) -> float:
        """Maximum mirror displacement 4κσ (m)."""
        return 4.0 * self.kappa * self.sigma

    @property
    def period(self) -> float:
        return TWO_PI / self.omega_m

    @property
    def wavepackets_separated(self) -> bool:
        """κ ≥ 1/4: the displaced packet clears the rest packet by its width."""
        return self.kappa >= 0.25

    @classmethod
    def from_experiment(
        cls,
        kappa: float = 0.25,
        sigma: float = 1e-13,
        period: float = 2e-3,
        eta: float = 0.0,
    ) -> "PhysicalParams":
        """Parameters of the proposed cantilever-mirror experiment."""
        return cls(omega_m=TWO_PI / period, sigma=sigma, kappa=kappa, eta=eta)


class SimParams(BaseModel):
    """Dimensionless parameters (ħ = ω_m = σ = 1) consumed by the physics modules."""

    model_config = ConfigDict(frozen=True)

    kappa: NonNegativeFloat
    eta_hat: NonNegativeFloat = 0.0
    n_trunc: int = Field(default=settings.default_n_trunc, ge=2)
    t_grid: Tuple[float, ...]

    @field_validator("t_grid")
    @classmethod
    def check_grid(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) == 0:
            raise ValueError("t_grid must not be empty")
        if value[0] != 0.0:
            raise ValueError("t_grid must start at 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("t_grid must be strictly increasing")
        if not all(math.isfinite(t) for t in value):
            raise ValueError("t_grid must be finite")
        return value

    @classmethod
    def over_periods(
        cls,
        kappa: float,
        eta_hat: float = 0.0,
        n_trunc: int = settings.default_n_trunc,
        periods: float = 1.0,
        n_points: int = 65,
    ) -> "SimParams":
        grid = np.linspace(0.0, TWO_PI * periods, n_points)
        return cls(kappa=kappa, eta_hat=eta_hat, n_trunc=n_trunc, t_grid=tuple(float(t) for t in grid))

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t_grid, dtype=float)


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: PositiveFloat = TWO_PI / settings.rk4_steps_per_period
    scheme: IntegratorScheme = IntegratorScheme.FIXED_RK4
    tol: PositiveFloat = settings.rk4_tol
    n_trunc: Optional[int] = Field(default=None, ge=2)


class TrajectoryConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_traj: int = Field(default=settings.default_n_traj, ge=1)
    step: PositiveFloat = TWO_PI / settings.sde_steps_per_period
    seed: int = Field(default=0, ge=0, lt=2**64)
    scheme: NoiseScheme = NoiseScheme.EULER_MARUYAMA
    sampling: LinearSampling = LinearSampling.TILTED
    record_times: Optional[Tuple[float, ...]] = None


class CollapseModelSpec(BaseModel):
    """Collapse-model parameters in the units the literature quotes them (cgs)."""

    model_config = ConfigDict(frozen=True)

    model: ModelTag
    lambda_grw: Optional[PositiveFloat] = None  # s^-1
    alpha: Optional[PositiveFloat] = None  # cm^-2
    n_nucleons: Optional[PositiveFloat] = None
    gamma_csl: Optional[PositiveFloat] = None  # cm^3 s^-1
    density_D: Optional[PositiveFloat] = None  # cm^-3
    side_S: Optional[PositiveFloat] = None  # cm
    eta_direct: Optional[NonNegativeFloat] = None  # s^-1 m^-2

    @classmethod
    def grw_reference(cls, n_nucleons: float = 3e15) -> "CollapseModelSpec":
        return cls(model=ModelTag.GRW, lambda_grw=1e-16, alpha=1e10, n_nucleons=n_nucleons)

    @classmethod
    def csl_reference(cls, gamma_csl: float = 1e-30) -> "CollapseModelSpec":
        return cls(model=ModelTag.CSL, gamma_csl=gamma_csl, alpha=1e10, density_D=1e24, side_S=1e-3)


# Result schemas
class CurveSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    f: complex
    stderr: Optional[float] = None

    @computed_field
    @property
    def nu(self) -> float:
        return abs(self.f)


class VisibilityCurve(BaseModel):
    method: CurveMethod
    samples: List[CurveSample]
    meta: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("samples")
    @classmethod
    def check_order(cls, value: List[CurveSample]) -> List[CurveSample]:
        if any(b.t <= a.t for a, b in zip(value, value[1:])):
            raise ValueError("samples must be ordered by t")
        return value

    @classmethod
    def from_arrays(
        cls,
        method: CurveMethod,
        t: np.ndarray,
        f: np.ndarray,
        stderr: Optional[np.ndarray] = None,
        meta: Optional[Dict[str, Any]] = None,
    ) -> "VisibilityCurve":
        f = np.asarray(f, dtype=complex)
        if not np.all(np.isfinite(f)):
            raise NumericalError(f"{method.value}: non-finite f values")
        if not method.stochastic and np.max(np.abs(f)) > 1.0 + 1e-9:
            raise NumericalError(f"{method.value}: visibility {np.max(np.abs(f)):.12g} exceeds 1")
        samples = [
            CurveSample(
                t=float(ti),
                f=complex(fi),
                stderr=None if stderr is None else float(stderr[i]),
            )
            for i, (ti, fi) in enumerate(zip(t, f))
        ]
        return cls(method=method, samples=samples, meta=dict(meta or {}))

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def f_values(self) -> np.ndarray:
        return np.array([s.f for s in self.samples], dtype=complex)

    @property
    def nu_values(self) -> np.ndarray:
        return np.abs(self.f_values)


class EnsemblePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    mean_f: complex
    stderr_f: NonNegativeFloat


class EnsembleEstimate(BaseModel):
    method: CurveMethod
    points: List[EnsemblePoint]
    n_traj: int
    seed: int
    mean_norm_sq: Optional[List[float]] = None
    stderr_norm_sq: Optional[List[float]] = None
    meta: Dict[str, Any] = Field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def mean_f(self) -> np.ndarray:
        return np.array([p.mean_f for p in self.points], dtype=complex)

    @property
    def stderr_f(self) -> np.ndarray:
        return np.array([p.stderr_f for p in self.points])

    def at(self, t: float) -> EnsemblePoint:
        for point in self.points:
            if math.isclose(point.t, t, rel_tol=1e-12, abs_tol=1e-12):
                return point
        raise KeyError(f"no record at t = {t}")

    def to_curve(self) -> VisibilityCurve:
        meta = {**self.meta, "n_traj": self.n_traj, "seed": self.seed}
        return VisibilityCurve.from_arrays(self.method, self.times, self.mean_f, self.stderr_f, meta)


class SweepPair(BaseModel):
    n_low: int
    n_high: int
    max_diff: float


class TruncationReport(BaseModel):
    n_list: List[int]
    pairs: List[SweepPair]
    tol: float
    converged_n: int


class StepReport(BaseModel):
    steps: List[float]
    max_errors: List[float]
    ratios: List[float]

    @property
    def observed_orders(self) -> List[float]:
        return [math.log2(r) if r > 0 else float("nan") for r in self.ratios]


class CollapseEstimate(BaseModel):
    model: ModelTag
    eta_si: float  # s^-1 m^-2
    eta_cgs: float  # s^-1 cm^-2
    lambda_: Optional[float] = None
    gamma_max: Optional[float] = None  # cm^3 s^-1
    accuracy: Optional[float] = None
    eta_max: Optional[float] = None  # s^-1 m^-2 keeping Λ within accuracy


class GammaBound(BaseModel):
    accuracy: float
    gamma_max: float  # cm^3 s^-1
    lambda_per_gamma: float  # Λ per unit γ (cm^-3 s)
    reference_fullerene: float = 1e-19
    conventional_gamma: float = 1e-30

    @property
    def orders_from_decisive(self) -> float:
        """Decades between the bound and the conventional CSL γ."""
        return math.log10(self.gamma_max / self.conventional_gamma)


class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: float
    threshold: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name}: {verdict} measured={self.measured:.6g} threshold={self.threshold:.6g}"


# Run configuration
class RunConfig(BaseModel):
    """Validated contents of a flat `key = value` run config."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    method: CurveMethod = CurveMethod.EXACT

    # Dimensionless shortcut
    kappa: Optional[NonNegativeFloat] = None
    eta_hat: Optional[NonNegativeFloat] = None

    # Physical parameters (SI)
    omega_c: Optional[PositiveFloat] = None
    omega_m: Optional[PositiveFloat] = None
    mass: Optional[PositiveFloat] = None
    sigma: Optional[PositiveFloat] = None
    coupling_G: Optional[NonNegativeFloat] = None
    eta: Optional[NonNegativeFloat] = None

    # Collapse model
    model: Optional[ModelTag] = None
    lambda_grw: Optional[PositiveFloat] = None
    alpha: Optional[PositiveFloat] = None
    n_nucleons: Optional[PositiveFloat] = None
    gamma_csl: Optional[PositiveFloat] = None
    density_D: Optional[PositiveFloat] = None
    side_S: Optional[PositiveFloat] = None
    eta_direct: Optional[NonNegativeFloat] = None
    accuracy: Optional[float] = Field(default=None, gt=0.0, lt=1.0)

    # Grid
    periods: PositiveFloat = 1.0
    n_points: int = Field(default=65, ge=2)

    # Integrator
    n_trunc: int = Field(default=settings.default_n_trunc, ge=2)
    step: Optional[PositiveFloat] = None
    scheme: IntegratorScheme = IntegratorScheme.FIXED_RK4
    tol: PositiveFloat = settings.rk4_tol

    # Trajectories
    n_traj: int = Field(default=settings.default_n_traj, ge=1)
    traj_step: Optional[PositiveFloat] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    sampling: LinearSampling = LinearSampling.TILTED

    # Sweeps
    sweep_kind: SweepKind = SweepKind.TRUNCATION
    n_list: List[int] = Field(default_factory=lambda: [4, 8, 16, 32])
    step_list: Optional[List[PositiveFloat]] = None

    out: Optional[Path] = None

    def collapse_spec(self) -> Optional[CollapseModelSpec]:
        if self.model is None:
            return None
        fields = CollapseModelSpec.model_fields.keys()
        return CollapseModelSpec(**{k: getattr(self, k) for k in fields})

    def physical_params(self) -> Optional[PhysicalParams]:
        """SI parameters when the config describes the apparatus, else None."""
        if self.omega_m is None:
            return None
        return PhysicalParams(
            omega_c=self.omega_c,
            omega_m=self.omega_m,
            mass=self.mass,
            sigma=self.sigma,
            coupling_G=self.coupling_G,
            kappa=self.kappa,
            eta=self.eta or 0.0,
        )

    def integrator_config(self) -> IntegratorConfig:
        update: Dict[str, Any] = {"scheme": self.scheme, "tol": self.tol}
        if self.step is not None:
            update["step"] = self.step
        return IntegratorConfig(**update)

    def trajectory_config(self) -> TrajectoryConfig:
        update: Dict[str, Any] = {"n_traj": self.n_traj, "seed": self.seed, "sampling": self.sampling}
        if self.traj_step is not None:
            update["step"] = self.traj_step
        return TrajectoryConfig(**update)
