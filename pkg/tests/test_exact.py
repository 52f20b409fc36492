import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirrorsim.errors import NumericalError, ParameterError
from mirrorsim.schemas import CurveMethod, PhysicalParams, SimParams, VisibilityCurve
from mirrorsim.services import exact

TWO_PI = 2.0 * math.pi


def test_unitary_revival_after_one_period():
    f = complex(exact.f_qm(TWO_PI, 0.25))
    assert abs(f) == pytest.approx(1.0, abs=1e-14)
    assert np.angle(f) == pytest.approx(TWO_PI * 0.25**2, abs=1e-12)


def test_unitary_minimum_at_half_period():
    assert abs(complex(exact.f_qm(math.pi, 0.5))) == pytest.approx(math.exp(-0.5), rel=1e-14)


def test_exact_reduces_to_unitary_without_damping():
    t = np.linspace(0.0, 3.0 * TWO_PI, 200)
    assert np.allclose(exact.f_exact(t, 0.3, 0.0), exact.f_qm(t, 0.3), atol=0, rtol=1e-15)


@given(st.floats(0.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_unitary_visibility_is_periodic(kappa):
    t = np.linspace(0.0, TWO_PI, 97)
    assert np.allclose(exact.visibility(t + TWO_PI, kappa, 0.0), exact.visibility(t, kappa, 0.0), atol=1e-12, rtol=0)


def test_period_damping_equals_lambda():
    kappa, eta_hat = 0.25, 0.1
    nu = float(exact.visibility(TWO_PI, kappa, eta_hat))
    assert -math.log(nu) == pytest.approx(exact.lambda_damping_hat(kappa, eta_hat), rel=1e-12)


def test_envelope_small_time_series():
    assert exact.damping_envelope(0.0) == 0.0
    assert float(exact.damping_envelope(0.01)) == pytest.approx(0.01**5 / 30.0, rel=1e-6)


def test_envelope_continuous_across_series_cutoff():
    below = float(exact.damping_envelope(0.05 - 1e-12))
    above = float(exact.damping_envelope(0.05 + 1e-12))
    assert above == pytest.approx(below, rel=1e-8)


def test_envelope_monotone_on_fine_grid():
    t = np.linspace(0.0, TWO_PI, 10_000)
    assert np.min(exact.damping_envelope_rate(t)) >= 0.0
    assert np.min(np.diff(exact.damping_envelope(t))) >= -1e-12


@given(st.floats(0.0, 20.0))
@settings(max_examples=200, deadline=None)
def test_envelope_rate_matches_polynomial_form(t):
    assert float(exact.damping_envelope_rate(t)) == pytest.approx((2.0 / 3.0) * (math.cos(t) - 1.0) ** 2, abs=1e-12)


@given(st.floats(0.0, 30.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_heuristic_never_above_exact(t, kappa, eta_hat):
    assert exact.visibility(t, kappa, eta_hat) >= abs(exact.f_heuristic(t, kappa, eta_hat)) - 1e-15


def test_heuristic_exponent_ratio_after_periods():
    kappa, eta_hat = 0.25, 0.05
    t = exact.revival_times(3)[1:]
    ratio = np.log(np.abs(exact.f_heuristic(t, kappa, eta_hat))) / np.log(exact.visibility(t, kappa, eta_hat))
    assert np.allclose(ratio, exact.heuristic_exponent_ratio(), rtol=1e-12)


def test_revival_times():
    assert np.allclose(exact.revival_times(2), [0.0, TWO_PI, 2.0 * TWO_PI])


def test_coherent_amplitude_returns_to_origin():
    assert abs(complex(exact.coherent_amplitude(TWO_PI, 0.25))) < 1e-15
    assert complex(exact.coherent_amplitude(math.pi, 0.25)) == pytest.approx(0.5)


def test_lambda_for_experiment():
    p = PhysicalParams.from_experiment(eta=0.6e21)
    assert exact.lambda_damping(p) == pytest.approx(2.25e-9, rel=1e-12)
    assert p.ell == pytest.approx(1e-13)
    eta_hat = p.eta * p.sigma**2 / p.omega_m
    assert exact.lambda_damping_hat(p.kappa, eta_hat) == pytest.approx(exact.lambda_damping(p), rel=1e-12)


def test_negative_eta_rejected():
    with pytest.raises(ParameterError):
        exact.f_exact(1.0, 0.25, -0.1)


def test_sample_curve_exact(unitary_params):
    curve = exact.sample_curve("exact", unitary_params)
    assert curve.method is CurveMethod.EXACT
    assert len(curve.samples) == 65
    assert curve.samples[-1].nu == pytest.approx(1.0, abs=1e-12)
    assert curve.meta["kappa"] == 0.25


def test_sample_curve_rejects_integrator_methods(damped_params):
    with pytest.raises(ParameterError):
        exact.sample_curve(CurveMethod.MASTER_OD, damped_params)
    with pytest.raises(ParameterError):
        exact.sample_curve("wigner", damped_params)


def test_curve_rejects_visibility_above_one():
    with pytest.raises(NumericalError):
        VisibilityCurve.from_arrays(CurveMethod.EXACT, np.array([0.0]), np.array([1.5]))


def test_single_point_grid():
    params = SimParams(kappa=0.25, eta_hat=0.1, t_grid=(0.0,))
    curve = exact.sample_curve(CurveMethod.HEURISTIC, params)
    assert curve.samples[0].f == 1.0


def test_wavepacket_separation_threshold():
    assert PhysicalParams.from_experiment(kappa=0.25).wavepackets_separated
    assert not PhysicalParams.from_experiment(kappa=0.1).wavepackets_separated
