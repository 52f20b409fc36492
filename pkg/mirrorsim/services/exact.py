"""Closed-form off-diagonal factor f(t) and visibility, in dimensionless time ω_m t."""

import logging
import math
from typing import Union

import numpy as np

from mirrorsim.errors import ParameterError
from mirrorsim.schemas import CurveMethod, PhysicalParams, SimParams, VisibilityCurve

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this |t| the envelope is summed from its Taylor series; the closed
# form loses monotonicity to cancellation there.
_SERIES_CUTOFF = 0.05


def coherent_amplitude(t: ArrayLike, kappa: float) -> ArrayLike:
    """α_t = κ(1 − e^{−it}) of the displaced mirror branch."""
    return kappa * (1.0 - np.exp(-1j * np.asarray(t, dtype=float)))


def f_qm(t: ArrayLike, kappa: float) -> ArrayLike:
    """Unitary off-diagonal factor e^{iκ²(t − sin t)} e^{−κ²(1 − cos t)}."""
    t = np.asarray(t, dtype=float)
    k2 = kappa * kappa
    return np.exp(1j * k2 * (t - np.sin(t)) - k2 * (1.0 - np.cos(t)))


def damping_envelope(t: ArrayLike) -> ArrayLike:
    """g(t) = t − (4/3) sin t + (1/6) sin 2t, the decoherence exponent per 3κ²η̂."""
    t = np.asarray(t, dtype=float)
    closed = t - (4.0 / 3.0) * np.sin(t) + np.sin(2.0 * t) / 6.0
    t2 = t * t
    series = t2 * t2 * t * (1.0 / 30.0 - t2 * (1.0 / 252.0 - t2 / 4320.0))
    return np.where(np.abs(t) < _SERIES_CUTOFF, series, closed)


def damping_envelope_rate(t: ArrayLike) -> ArrayLike:
    """g'(t) = (2/3)(1 − cos t)², written as (8/3) sin⁴(t/2)."""
    s = np.sin(0.5 * np.asarray(t, dtype=float))
    return (8.0 / 3.0) * s**4


def f_exact(t: ArrayLike, kappa: float, eta_hat: float) -> ArrayLike:
    """f with the Lindblad damping factor exp(−3κ²η̂ g(t)).

    (3/16)ηℓ²/ω_m equals 3κ²η̂ identically, so no SI products are formed.
    """
    if eta_hat < 0:
        raise ParameterError(f"eta_hat must be >= 0, got {eta_hat}")
    return f_qm(t, kappa) * np.exp(-3.0 * kappa * kappa * eta_hat * damping_envelope(t))


def visibility(t: ArrayLike, kappa: float, eta_hat: float) -> ArrayLike:
    return np.abs(f_exact(t, kappa, eta_hat))


def f_heuristic(t: ArrayLike, kappa: float, eta_hat: float) -> ArrayLike:
    """Unitary f times e^{−½ηℓ²t}: the largest branch separation held for all t."""
    t = np.asarray(t, dtype=float)
    return f_qm(t, kappa) * np.exp(-8.0 * kappa * kappa * eta_hat * t)


def heuristic_exponent_ratio() -> float:
    """Heuristic over exact damping exponent after whole periods."""
    return 8.0 / 3.0


def lambda_damping(p: PhysicalParams) -> float:
    """Λ = (3/16) η ℓ² (2π/ω_m): log-damping of the visibility after one period."""
    return (3.0 / 16.0) * p.eta * p.ell**2 * p.period


def lambda_damping_hat(kappa: float, eta_hat: float) -> float:
    """Λ in dimensionless form, 6πκ²η̂."""
    return 6.0 * math.pi * kappa * kappa * eta_hat


def revival_times(n_periods: int) -> np.ndarray:
    """t = 2πn, n = 0..n_periods, where the unitary visibility returns to 1."""
    return 2.0 * math.pi * np.arange(n_periods + 1, dtype=float)


_CLOSED_FORMS = {
    CurveMethod.EXACT: lambda t, p: f_exact(t, p.kappa, p.eta_hat),
    CurveMethod.QM_ONLY: lambda t, p: f_qm(t, p.kappa),
    CurveMethod.HEURISTIC: lambda t, p: f_heuristic(t, p.kappa, p.eta_hat),
}


def sample_curve(method: Union[CurveMethod, str], params: SimParams) -> VisibilityCurve:
    """Evaluate a closed-form curve on `params.t_grid`."""
    try:
        method = CurveMethod(method)
    except ValueError as e:
        raise ParameterError(f"unknown method {method!r}") from e
    if not method.closed_form:
        raise ParameterError(f"method {method.value!r} has no closed form; use its integrator")

    t = params.times
    f = _CLOSED_FORMS[method](t, params)
    logger.debug(f"Sampled {method.value} curve on {t.size} points")
    meta = {"kappa": params.kappa, "eta_hat": params.eta_hat}
    return VisibilityCurve.from_arrays(method, t, f, meta=meta)
