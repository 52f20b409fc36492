import math

import numpy as np
import pytest
from scipy.linalg import expm

from mirrorsim.errors import ConvergenceError, NumericalError, ParameterError
from mirrorsim.schemas import IntegratorConfig, IntegratorScheme, OperatorKind, SimParams
from mirrorsim.services import exact, master
from mirrorsim.services.core import make_operator

TWO_PI = 2.0 * math.pi


def _od_liouvillian(params: SimParams) -> np.ndarray:
    """Column-stacked superoperator of the reduced generator."""
    n = params.n_trunc
    eye = np.eye(n)
    x = make_operator(OperatorKind.POSITION, n).entries
    h_a = make_operator(OperatorKind.HAMILTONIAN_A, n, params.kappa).entries
    h_b = make_operator(OperatorKind.HAMILTONIAN_B, n).entries
    k_a = -1j * h_a - 0.5 * params.eta_hat * x @ x
    k_b_dag = (-1j * h_b - 0.5 * params.eta_hat * x @ x).conj().T
    return np.kron(eye, k_a) + np.kron(k_b_dag.T, eye) + params.eta_hat * np.kron(x.T, x)


def test_reduced_integrator_matches_matrix_exponential():
    params = SimParams.over_periods(0.4, 0.2, n_trunc=8, periods=1.0, n_points=9)
    liouvillian = _od_liouvillian(params)
    rho0 = master.OffDiagonalMatrix.initial(8).entries.flatten(order="F")

    curve = master.integrate_od(params)
    expected = [np.trace((expm(liouvillian * t) @ rho0).reshape(8, 8, order="F")) for t in params.times]
    assert np.allclose(curve.f_values, expected, atol=1e-9, rtol=0)


def test_unitary_reduced_matches_closed_form(unitary_params):
    curve = master.integrate_od(unitary_params)
    assert np.max(np.abs(curve.f_values - exact.f_qm(unitary_params.times, 0.25))) < 1e-8
    assert curve.nu_values[-1] == pytest.approx(1.0, abs=1e-8)


def test_damped_reduced_matches_closed_form(damped_params):
    curve = master.integrate_od(damped_params)
    reference = exact.f_exact(damped_params.times, damped_params.kappa, damped_params.eta_hat)
    assert np.max(np.abs(curve.f_values - reference)) < 1e-6
    assert curve.meta["n_trunc"] == 24
    assert "photon_phase" in curve.meta


def test_full_and_reduced_agree(damped_params):
    full = master.integrate_full(None, damped_params)
    od = master.integrate_od(damped_params)
    assert np.max(np.abs(full.f_values - od.f_values)) < 1e-9


def test_full_evolution_keeps_density_matrix_properties(damped_params):
    states = master.evolve_full(None, damped_params)
    for rho in states[::8]:
        assert abs(rho.trace - 1.0) < 1e-10
        assert rho.hermiticity_error < 1e-12
        assert rho.min_eigenvalue > -1e-8


def test_full_diagnostics_reported(damped_params):
    curve = master.integrate_full(None, damped_params)
    assert curve.meta["max_trace_error"] < 1e-10
    assert curve.meta["max_hermiticity_error"] < 1e-12
    assert curve.meta["min_eigenvalue"] > -1e-8


def test_initial_states():
    rho = master.FullDensityMatrix.initial(4)
    assert rho.f == pytest.approx(1.0)
    assert rho.trace == pytest.approx(1.0)
    assert master.OffDiagonalMatrix.initial(4).trace == 1.0


def test_rhs_shape_checks(damped_params):
    with pytest.raises(ParameterError):
        master.lindblad_rhs_od(master.OffDiagonalMatrix.initial(5), damped_params)
    with pytest.raises(ParameterError):
        master.lindblad_rhs_full(master.FullDensityMatrix.initial(5), damped_params)


def test_rhs_is_traceless_on_full_space(damped_params):
    rho = master.FullDensityMatrix.initial(damped_params.n_trunc)
    assert abs(np.trace(master.lindblad_rhs_full(rho, damped_params))) < 1e-14


def test_single_grid_point_returns_initial_state():
    params = SimParams(kappa=0.25, eta_hat=0.1, n_trunc=8, t_grid=(0.0,))
    curve = master.integrate_od(params)
    assert curve.f_values.tolist() == [1.0]


def test_rk4_fourth_order(damped_params):
    params = damped_params.model_copy(update={"n_trunc": 32})
    report = master.step_sweep(params, IntegratorConfig(), [TWO_PI / 256, TWO_PI / 512])
    assert 8.0 <= report.ratios[0] <= 32.0
    assert report.observed_orders[0] == pytest.approx(4.0, abs=1.0)


def test_step_doubling_meets_tolerance(damped_params):
    cfg = IntegratorConfig(scheme=IntegratorScheme.RK4_STEP_DOUBLING, tol=1e-10, step=TWO_PI / 64)
    curve = master.integrate_od(damped_params, cfg)
    reference = exact.f_exact(damped_params.times, damped_params.kappa, damped_params.eta_hat)
    assert np.max(np.abs(curve.f_values - reference)) < 1e-6
    assert curve.meta["scheme"] == "rk4-step-doubling"


def test_truncation_sweep_converges_by_sixteen(unitary_params):
    report = master.truncation_sweep(unitary_params, IntegratorConfig(), [4, 8, 16, 32])
    assert report.converged_n <= 16
    assert [(p.n_low, p.n_high) for p in report.pairs] == [(4, 8), (8, 16), (16, 32)]


def test_reduced_generator_on_two_levels():
    # −i[n, ρ] − (η̂/2)[x, [x, ρ]] for ρ = |0><1|, worked by hand
    params = SimParams(kappa=0.0, eta_hat=0.3, n_trunc=2, t_grid=(0.0,))
    rho = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    rhs = master.lindblad_rhs_od(master.OffDiagonalMatrix(rho), params)
    assert np.allclose(rhs, [[0.0, 1j - 0.3], [0.3, 0.0]], atol=1e-15, rtol=0)


def test_vacuum_is_stationary_without_coupling_or_damping():
    params = SimParams(kappa=0.0, eta_hat=0.0, n_trunc=6, t_grid=(0.0,))
    rhs = master.lindblad_rhs_od(master.OffDiagonalMatrix(np.diag([1.0, 0, 0, 0, 0, 0])), params)
    assert np.max(np.abs(rhs)) == 0.0


def test_photon_mixture_is_stationary_without_coupling_or_damping():
    n = 6
    params = SimParams(kappa=0.0, eta_hat=0.0, n_trunc=n, t_grid=(0.0,))
    populations = np.zeros(2 * n)
    populations[0] = populations[n] = 0.5
    rhs = master.lindblad_rhs_full(master.FullDensityMatrix(np.diag(populations)), params)
    assert np.max(np.abs(rhs)) == 0.0


def test_stronger_coupling_needs_larger_truncation(unitary_params):
    narrow = master.truncation_sweep(unitary_params, IntegratorConfig(), [4, 8, 16, 32, 64])
    strong = unitary_params.model_copy(update={"kappa": 1.0})
    wide = master.truncation_sweep(strong, IntegratorConfig(), [4, 8, 16, 32, 64])
    assert wide.converged_n > narrow.converged_n
    assert wide.converged_n <= 32


def test_truncation_sweep_rejects_unsorted_list(unitary_params):
    with pytest.raises(ParameterError):
        master.truncation_sweep(unitary_params, IntegratorConfig(), [8, 4])


def test_truncation_sweep_without_convergence():
    params = SimParams.over_periods(2.0, 0.0, n_trunc=4, periods=1.0, n_points=9)
    with pytest.raises(ConvergenceError):
        master.truncation_sweep(params, IntegratorConfig(), [2, 3, 4])


def test_positivity_violation_is_reported():
    # negative population in the initial state
    params = SimParams.over_periods(0.25, 0.1, n_trunc=4, periods=1.0, n_points=5)
    entries = np.diag([1.2, -0.2, 0, 0, 0, 0, 0, 0]).astype(complex)
    with pytest.raises(NumericalError):
        master.evolve_full(master.FullDensityMatrix(entries), params)


def test_unstable_step_is_reported():
    params = SimParams.over_periods(0.25, 0.0, n_trunc=64, periods=4.0, n_points=3)
    with pytest.raises(NumericalError):
        master.integrate_od(params, IntegratorConfig(step=2.0))
