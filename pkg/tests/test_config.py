import math

import pytest
from pydantic import ValidationError

from mirrorsim.config import Settings, load_run_config, parse_flat_config
from mirrorsim.errors import ConfigError
from mirrorsim.schemas import (
    CurveMethod,
    IntegratorScheme,
    LinearSampling,
    ModelTag,
    PhysicalParams,
    RunConfig,
    SimParams,
)


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("MIRRORSIM_TRAJECTORY_BATCH", "128")
    monkeypatch.setenv("MIRRORSIM_LOG_LEVEL", "DEBUG")
    fresh = Settings()
    assert fresh.trajectory_batch == 128
    assert fresh.log_level == "DEBUG"


def test_parse_flat_config_handles_comments_and_lists():
    values = parse_flat_config("# header\nkappa = 0.25  # coupling\n\nn_list = 4, 8,16\n")
    assert values == {"kappa": "0.25", "n_list": ["4", "8", "16"]}


@pytest.mark.parametrize(
    "text",
    ["kappa 0.25", "= 3", "kappa = 0.1\nkappa = 0.2"],
)
def test_parse_flat_config_rejects_malformed_lines(text):
    with pytest.raises(ConfigError):
        parse_flat_config(text)


def test_load_run_config(write_config):
    path = write_config("method = master-od\nkappa = 0.25\neta_hat = 0.1\nscheme = rk4-step-doubling\n")
    cfg = load_run_config(path)
    assert cfg.method is CurveMethod.MASTER_OD
    assert cfg.integrator_config().scheme is IntegratorScheme.RK4_STEP_DOUBLING
    assert cfg.integrator_config().step == pytest.approx(2.0 * math.pi / 4096)


def test_overrides_take_precedence(write_config, tmp_path):
    path = write_config("kappa = 0.25\nseed = 1\n")
    cfg = load_run_config(path, overrides={"seed": 99, "out": str(tmp_path / "x.csv"), "n_traj": None})
    assert cfg.seed == 99
    assert cfg.out == tmp_path / "x.csv"
    assert cfg.trajectory_config().seed == 99


def test_linear_sampling_key(write_config):
    assert load_run_config(write_config("kappa = 0.25\n")).trajectory_config().sampling is LinearSampling.TILTED
    cfg = load_run_config(write_config("kappa = 0.25\nsampling = reference\n"))
    assert cfg.trajectory_config().sampling is LinearSampling.REFERENCE


@pytest.mark.parametrize(
    "text",
    [
        "kappa = 0.25\ncolour = blue\n",
        "method = wigner\n",
        "kappa = -1\n",
        "accuracy = 1.5\n",
        "seed = -3\n",
        "sampling = importance\n",
    ],
)
def test_invalid_values_are_config_errors(write_config, text):
    with pytest.raises(ConfigError) as info:
        load_run_config(write_config(text))
    assert info.value.exit_code == 2
    assert "\n" not in str(info.value)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.conf")


def test_collapse_spec_from_config(write_config):
    cfg = load_run_config(write_config("model = CSL\ngamma_csl = 1e-30\nside_S = 1e-3\n"))
    spec = cfg.collapse_spec()
    assert spec.model is ModelTag.CSL
    assert spec.side_S == 1e-3
    assert spec.density_D is None


def test_physical_params_derive_sigma_and_coupling():
    mass = 1e-12
    omega = 2.0 * math.pi * 500.0
    p = PhysicalParams(omega_m=omega, mass=mass, coupling_G=0.25 * omega)
    assert p.kappa == pytest.approx(0.25)
    assert p.sigma == pytest.approx(math.sqrt(1.054571817e-34 / (2.0 * mass * omega)), rel=1e-9)


def test_physical_params_reject_inconsistent_input():
    with pytest.raises(ValidationError):
        PhysicalParams(omega_m=1.0, sigma=1e-13, kappa=0.25, coupling_G=1.0)
    with pytest.raises(ValidationError):
        PhysicalParams(omega_m=1.0, kappa=0.25)
    with pytest.raises(ValidationError):
        PhysicalParams(omega_m=1.0, sigma=1e-13)


def test_sim_params_grid_validation():
    with pytest.raises(ValidationError):
        SimParams(kappa=0.25, t_grid=())
    with pytest.raises(ValidationError):
        SimParams(kappa=0.25, t_grid=(0.0, 1.0, 1.0))
    with pytest.raises(ValidationError):
        SimParams(kappa=0.25, n_trunc=1, t_grid=(0.0,))


def test_run_config_is_frozen():
    cfg = RunConfig(kappa=0.25)
    with pytest.raises(ValidationError):
        cfg.kappa = 0.5
