"""Lindblad master-equation integration in a truncated Fock basis.

The full state lives on {A-branch, B-branch} ⊗ {|0>..|N-1>}, A-branch meaning
the photon went through the cavity with the movable mirror. f(t) is
2·Tr_m <A|ρ|B> for the full system and Tr_m ρ_OD for the reduced one.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from mirrorsim.config import settings
from mirrorsim.errors import ConvergenceError, NumericalError, ParameterError
from mirrorsim.instrumentation import log_timing
from mirrorsim.schemas import (
    CurveMethod,
    IntegratorConfig,
    IntegratorScheme,
    OperatorKind,
    SimParams,
    StepReport,
    SweepPair,
    TruncationReport,
    VisibilityCurve,
)
from mirrorsim.services import exact
from mirrorsim.services.core import make_operator

logger = logging.getLogger(__name__)

Rhs = Callable[[np.ndarray], np.ndarray]

PHOTON_PHASE_NOTE = "photon term hbar*omega_c*(a_A^+ a_A + a_B^+ a_B) dropped: global phase cancels in f"


@dataclass(frozen=True)
class OffDiagonalMatrix:
    """Mirror operator between the two photon branches; Tr = f. Not Hermitian."""

    entries: np.ndarray

    @property
    def n_trunc(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    @classmethod
    def initial(cls, n_trunc: int) -> "OffDiagonalMatrix":
        rho = np.zeros((n_trunc, n_trunc), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho)


@dataclass(frozen=True)
class FullDensityMatrix:
    entries: np.ndarray

    @property
    def n_trunc(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        hermitian = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(hermitian)[0])

    def off_diagonal(self) -> OffDiagonalMatrix:
        n = self.n_trunc
        return OffDiagonalMatrix(2.0 * self.entries[:n, n:])

    @property
    def f(self) -> complex:
        return self.off_diagonal().trace

    @classmethod
    def initial(cls, n_trunc: int) -> "FullDensityMatrix":
        """Photon split equally between the arms, mirror in its ground state."""
        psi = np.zeros(2 * n_trunc, dtype=complex)
        psi[0] = psi[n_trunc] = 1.0 / math.sqrt(2.0)
        return cls(np.outer(psi, psi.conj()))


class LindbladGenerator:
    """Dimensionless generator −i[H̃, ρ] − (η̂/2)[x, [x, ρ]] with x = b + b†.

    Written as Kρ + ρK† + η̂ xρx with K = −iH − (η̂/2)x², so each call costs
    four matrix products.
    """

    def __init__(self, params: SimParams, n_trunc: Optional[int] = None):
        n = n_trunc or params.n_trunc
        self.n_trunc = n
        self.eta_hat = params.eta_hat
        x = make_operator(OperatorKind.POSITION, n).entries
        h_a = make_operator(OperatorKind.HAMILTONIAN_A, n, params.kappa).entries
        h_b = make_operator(OperatorKind.HAMILTONIAN_B, n).entries
        x2 = x @ x

        self.x = x
        self.k_a = -1j * h_a - 0.5 * self.eta_hat * x2
        self.k_b_dag = (-1j * h_b - 0.5 * self.eta_hat * x2).conj().T

        zeros = np.zeros((n, n), dtype=complex)
        self.k_full = np.block([[self.k_a, zeros], [zeros, -1j * h_b - 0.5 * self.eta_hat * x2]])
        self.k_full_dag = self.k_full.conj().T
        self.x_full = np.kron(np.eye(2), x)

    def od(self, rho: np.ndarray) -> np.ndarray:
        return self.k_a @ rho + rho @ self.k_b_dag + self.eta_hat * (self.x @ rho @ self.x)

    def full(self, rho: np.ndarray) -> np.ndarray:
        return self.k_full @ rho + rho @ self.k_full_dag + self.eta_hat * (self.x_full @ rho @ self.x_full)


def lindblad_rhs_full(rho: FullDensityMatrix, params: SimParams) -> np.ndarray:
    if rho.entries.shape != (2 * params.n_trunc, 2 * params.n_trunc):
        raise ParameterError(f"density matrix shape {rho.entries.shape} does not match n_trunc={params.n_trunc}")
    return LindbladGenerator(params).full(rho.entries)


def lindblad_rhs_od(rho_od: OffDiagonalMatrix, params: SimParams) -> np.ndarray:
    if rho_od.entries.shape != (params.n_trunc, params.n_trunc):
        raise ParameterError(f"rho_OD shape {rho_od.entries.shape} does not match n_trunc={params.n_trunc}")
    return LindbladGenerator(params).od(rho_od.entries)


def rk4_step(rhs: Rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class _Diagnostics:
    n_steps: int = 0
    rejected: int = 0
    min_eigenvalue: float = math.inf
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0


def _substeps(interval: float, step: float) -> int:
    return max(1, math.ceil(interval / step * (1.0 - 1e-12)))


def _propagate(
    rhs: Rhs,
    y0: np.ndarray,
    times: np.ndarray,
    cfg: IntegratorConfig,
    diag: _Diagnostics,
    monitor: Optional[Callable[[np.ndarray], None]] = None,
) -> List[np.ndarray]:
    """Integrate from times[0] and return the state at every grid point."""
    every = settings.positivity_check_every
    y = y0.copy()
    out = [y.copy()]
    h = cfg.step

    def after_step(y):
        diag.n_steps += 1
        if monitor is not None and diag.n_steps % every == 0:
            monitor(y)

    for t0, t1 in zip(times[:-1], times[1:]):
        interval = t1 - t0
        if cfg.scheme is IntegratorScheme.FIXED_RK4:
            n_sub = _substeps(interval, cfg.step)
            h_sub = interval / n_sub
            for _ in range(n_sub):
                y = rk4_step(rhs, y, h_sub)
                after_step(y)
        else:
            elapsed = 0.0
            while interval - elapsed > 1e-14 * max(1.0, interval):
                h_try = min(h, interval - elapsed)
                coarse = rk4_step(rhs, y, h_try)
                fine = rk4_step(rhs, rk4_step(rhs, y, 0.5 * h_try), 0.5 * h_try)
                err = float(np.max(np.abs(fine - coarse))) / 15.0
                if err <= cfg.tol:
                    y = fine
                    elapsed += h_try
                    after_step(y)
                    h = h_try * (2.0 if err == 0.0 else min(2.0, 0.9 * (cfg.tol / err) ** 0.2))
                else:
                    diag.rejected += 1
                    h = h_try * max(0.2, 0.9 * (cfg.tol / err) ** 0.2)
                    if h < 1e-12:
                        raise NumericalError(f"step-doubling step underflow at t = {t0 + elapsed:.6g}")
        if not np.all(np.isfinite(y)):
            raise NumericalError(f"non-finite entries at t = {t1:.6g}; reduce the step")
        if monitor is not None:
            monitor(y)
        out.append(y.copy())
    return out


def _effective_n(params: SimParams, cfg: IntegratorConfig) -> int:
    return cfg.n_trunc or params.n_trunc


def evolve_full(
    rho0: Optional[FullDensityMatrix],
    params: SimParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    diag: Optional[_Diagnostics] = None,
) -> List[FullDensityMatrix]:
    """Full photon⊗mirror density matrices at every point of `params.t_grid`."""
    n = _effective_n(params, cfg)
    rho0 = rho0 if rho0 is not None else FullDensityMatrix.initial(n)
    if rho0.entries.shape != (2 * n, 2 * n):
        raise ParameterError(f"initial state shape {rho0.entries.shape} does not match n_trunc={n}")
    diag = diag if diag is not None else _Diagnostics()
    generator = LindbladGenerator(params, n)

    def monitor(rho: np.ndarray):
        if not np.all(np.isfinite(rho)):
            raise NumericalError("non-finite density matrix entries; reduce the step")
        state = FullDensityMatrix(rho)
        lowest = state.min_eigenvalue
        diag.min_eigenvalue = min(diag.min_eigenvalue, lowest)
        diag.max_trace_error = max(diag.max_trace_error, abs(state.trace - 1.0))
        diag.max_hermiticity_error = max(diag.max_hermiticity_error, state.hermiticity_error)
        if lowest < -settings.positivity_tol:
            raise NumericalError(
                f"positivity violated: smallest eigenvalue {lowest:.3e} (n_trunc={n}); "
                "increase n_trunc or reduce the step"
            )

    states = _propagate(generator.full, rho0.entries.astype(complex), params.times, cfg, diag, monitor)
    return [FullDensityMatrix(rho) for rho in states]


def evolve_od(
    params: SimParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    diag: Optional[_Diagnostics] = None,
) -> List[OffDiagonalMatrix]:
    n = _effective_n(params, cfg)
    diag = diag if diag is not None else _Diagnostics()
    generator = LindbladGenerator(params, n)
    states = _propagate(generator.od, OffDiagonalMatrix.initial(n).entries, params.times, cfg, diag)
    return [OffDiagonalMatrix(rho) for rho in states]


def _meta(params: SimParams, cfg: IntegratorConfig, diag: _Diagnostics) -> dict:
    meta = {
        "kappa": params.kappa,
        "eta_hat": params.eta_hat,
        "n_trunc": _effective_n(params, cfg),
        "step": cfg.step,
        "scheme": cfg.scheme.value,
        "n_steps": diag.n_steps,
        "photon_phase": PHOTON_PHASE_NOTE,
    }
    if cfg.scheme is IntegratorScheme.RK4_STEP_DOUBLING:
        meta["tol"] = cfg.tol
        meta["rejected_steps"] = diag.rejected
    return meta


def integrate_full(
    rho0: Optional[FullDensityMatrix],
    params: SimParams,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> VisibilityCurve:
    """RK4 integration of the full Lindblad equation; `rho0=None` starts from the split-photon state."""
    diag = _Diagnostics()
    with log_timing(f"master-full n_trunc={_effective_n(params, cfg)}", logger):
        states = evolve_full(rho0, params, cfg, diag)
    f = np.array([state.f for state in states])
    meta = _meta(params, cfg, diag)
    meta.update(
        min_eigenvalue=diag.min_eigenvalue,
        max_trace_error=diag.max_trace_error,
        max_hermiticity_error=diag.max_hermiticity_error,
    )
    return VisibilityCurve.from_arrays(CurveMethod.MASTER_FULL, params.times, f, meta=meta)


def integrate_od(params: SimParams, cfg: IntegratorConfig = IntegratorConfig()) -> VisibilityCurve:
    """RK4 integration of the reduced equation for ρ_OD, starting from |0><0|."""
    diag = _Diagnostics()
    with log_timing(f"master-od n_trunc={_effective_n(params, cfg)}", logger):
        states = evolve_od(params, cfg, diag)
    f = np.array([state.trace for state in states])
    return VisibilityCurve.from_arrays(CurveMethod.MASTER_OD, params.times, f, meta=_meta(params, cfg, diag))


def truncation_sweep(
    params: SimParams,
    cfg: IntegratorConfig,
    n_list: Sequence[int],
    max_workers: Optional[int] = None,
) -> TruncationReport:
    """Compare f between consecutive truncations; the first pair below cfg.tol declares convergence."""
    n_list = list(n_list)
    if any(n < 2 for n in n_list):
        raise ParameterError("every truncation must be >= 2")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError(f"n_list must be increasing, got {n_list}")

    def run(n: int) -> np.ndarray:
        sized = params.model_copy(update={"n_trunc": n})
        return integrate_od(sized, cfg.model_copy(update={"n_trunc": None})).f_values

    workers = max_workers or settings.max_workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        curves = list(pool.map(run, n_list))

    pairs = [
        SweepPair(n_low=lo, n_high=hi, max_diff=float(np.max(np.abs(f_lo - f_hi))))
        for (lo, f_lo), (hi, f_hi) in zip(zip(n_list, curves), zip(n_list[1:], curves[1:]))
    ]
    for pair in pairs:
        logger.info(f"Truncation {pair.n_low} vs {pair.n_high}: max |df| = {pair.max_diff:.3e}")

    converged = next((pair.n_low for pair in pairs if pair.max_diff < cfg.tol), None)
    if converged is None:
        raise ConvergenceError(f"no truncation pair in {n_list} agrees to tol {cfg.tol:.1e}")
    return TruncationReport(n_list=n_list, pairs=pairs, tol=cfg.tol, converged_n=converged)


def step_sweep(
    params: SimParams,
    cfg: IntegratorConfig,
    steps: Sequence[float],
    oracle: Callable[[np.ndarray, float, float], np.ndarray] = exact.f_exact,
) -> StepReport:
    """Max deviation of the reduced integrator from `oracle` for each RK4 step."""
    steps = list(steps)
    errors = []
    reference = oracle(params.times, params.kappa, params.eta_hat)
    for step in steps:
        curve = integrate_od(params, cfg.model_copy(update={"step": step, "scheme": IntegratorScheme.FIXED_RK4}))
        errors.append(float(np.max(np.abs(curve.f_values - reference))))
        logger.info(f"RK4 step {step:.4e}: max |f - f_exact| = {errors[-1]:.3e}")
    ratios = [a / b if b > 0 else math.inf for a, b in zip(errors, errors[1:])]
    return StepReport(steps=steps, max_errors=errors, ratios=ratios)
