"""Collapse-model strengths η, the resulting Λ for an experiment, and bounds on CSL γ.

Inputs are cgs (as the collapse literature quotes them), outputs SI
(η in s^-1 m^-2). "Accuracy" of a coherence measurement is read as an upper
bound on Λ itself, valid because 1 − e^{−Λ} ≈ Λ at these scales.
"""

import logging
import math
from typing import Optional

from scipy.constants import centi

from mirrorsim.errors import ParameterError
from mirrorsim.schemas import CollapseEstimate, CollapseModelSpec, GammaBound, ModelTag, PhysicalParams
from mirrorsim.services import exact

logger = logging.getLogger(__name__)

PER_CM2_TO_PER_M2 = 1.0 / centi**2
FULLERENE_GAMMA_BOUND = 1e-19  # cm^3 s^-1, from fullerene diffraction
CONVENTIONAL_GAMMA_CSL = 1e-30  # cm^3 s^-1


def per_cm2_to_per_m2(value: float) -> float:
    return value * PER_CM2_TO_PER_M2


def per_m2_to_per_cm2(value: float) -> float:
    return value / PER_CM2_TO_PER_M2


def _require(spec: CollapseModelSpec, *names: str):
    missing = [name for name in names if getattr(spec, name) is None]
    if missing:
        raise ParameterError(f"{spec.model.value} model needs {', '.join(missing)}")


def eta_grw(spec: CollapseModelSpec) -> float:
    """η = N·λα/2 (GRW; also the QMUPL value), in s^-1 m^-2."""
    if spec.model not in (ModelTag.GRW, ModelTag.QMUPL):
        raise ParameterError(f"eta_grw needs a GRW or QMUPL spec, got {spec.model.value}")
    _require(spec, "lambda_grw", "alpha", "n_nucleons")
    eta_0 = 0.5 * spec.lambda_grw * per_cm2_to_per_m2(spec.alpha)
    return spec.n_nucleons * eta_0


def eta_csl(spec: CollapseModelSpec) -> float:
    """η = γ S² D² (α/π)^{1/2} for a cubic mirror, in s^-1 m^-2."""
    if spec.model is not ModelTag.CSL:
        raise ParameterError(f"eta_csl needs a CSL spec, got {spec.model.value}")
    _require(spec, "gamma_csl", "side_S", "density_D", "alpha")
    eta_cgs = spec.gamma_csl * spec.side_S**2 * spec.density_D**2 * math.sqrt(spec.alpha / math.pi)
    return per_cm2_to_per_m2(eta_cgs)


def eta_for_model(spec: CollapseModelSpec) -> float:
    if spec.model is ModelTag.CSL:
        return eta_csl(spec)
    if spec.model is ModelTag.DIRECT:
        _require(spec, "eta_direct")
        return spec.eta_direct
    return eta_grw(spec)


def nucleon_count(spec: CollapseModelSpec) -> float:
    """N = D S³ for the cubic mirror."""
    _require(spec, "density_D", "side_S")
    return spec.density_D * spec.side_S**3


def lambda_for_experiment(spec: CollapseModelSpec, p: PhysicalParams) -> float:
    eta = eta_for_model(spec)
    return exact.lambda_damping(p.model_copy(update={"eta": eta}))


def eta_for_lambda(target_lambda: float, p: PhysicalParams) -> float:
    """η (s^-1 m^-2) that damps the visibility by e^{−target} after one period."""
    if target_lambda < 0:
        raise ParameterError(f"target Lambda must be >= 0, got {target_lambda}")
    if p.ell == 0.0:
        raise ParameterError("zero mirror excursion: no eta produces damping")
    return target_lambda / ((3.0 / 16.0) * p.ell**2 * p.period)


def gamma_bound(visibility_accuracy: float, p: PhysicalParams, spec: CollapseModelSpec) -> GammaBound:
    """Largest CSL γ compatible with coherence maintained to `visibility_accuracy`."""
    if not 0.0 < visibility_accuracy < 1.0:
        raise ParameterError(f"accuracy must lie in (0, 1), got {visibility_accuracy}")
    _require(spec, "side_S", "density_D", "alpha")
    if p.ell == 0.0:
        raise ParameterError("degenerate geometry: zero mirror excursion")

    unit = spec.model_copy(update={"model": ModelTag.CSL, "gamma_csl": 1.0})
    lambda_per_gamma = lambda_for_experiment(unit, p)
    gamma_max = visibility_accuracy / lambda_per_gamma
    logger.debug(f"Lambda per unit gamma = {lambda_per_gamma:.6e}; gamma_max = {gamma_max:.6e} cm^3 s^-1")
    return GammaBound(
        accuracy=visibility_accuracy,
        gamma_max=gamma_max,
        lambda_per_gamma=lambda_per_gamma,
        reference_fullerene=FULLERENE_GAMMA_BOUND,
        conventional_gamma=CONVENTIONAL_GAMMA_CSL,
    )


def estimate(spec: CollapseModelSpec, p: PhysicalParams, accuracy: Optional[float] = None) -> CollapseEstimate:
    """η, Λ and, for CSL geometries, the γ bound in one record."""
    eta = eta_for_model(spec)
    bound = None
    eta_max = None
    if accuracy is not None:
        if spec.model is ModelTag.CSL:
            bound = gamma_bound(accuracy, p, spec).gamma_max
        if p.ell != 0.0:
            eta_max = eta_for_lambda(accuracy, p)
    return CollapseEstimate(
        model=spec.model,
        eta_si=eta,
        eta_cgs=per_m2_to_per_cm2(eta),
        lambda_=exact.lambda_damping(p.model_copy(update={"eta": eta})),
        gamma_max=bound,
        accuracy=accuracy,
        eta_max=eta_max,
    )
