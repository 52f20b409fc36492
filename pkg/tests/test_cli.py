import math

import numpy as np
import pytest

from mirrorsim.commands.validate import cmd_validate
from mirrorsim.config import load_run_config
from mirrorsim.errors import ValidationFailure
from mirrorsim.main import run
from mirrorsim.services import exact, report

UNITARY = "method = exact\nkappa = 0.25\neta_hat = 0\n"
DAMPED = "kappa = 0.25\neta_hat = 0.1\nn_trunc = 20\n"


def _rows(text):
    return np.array(report.read_curve_csv(text))


def test_exact_curve_revives(write_config, capsys):
    assert run(["curve", "--config", str(write_config(UNITARY))]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# method = exact\n")
    assert "t_rad,re_f,im_f,visibility\n" in out
    rows = _rows(out)
    assert rows.shape == (65, 4)
    assert rows[-1, 0] == pytest.approx(2.0 * math.pi)
    assert rows[-1, 3] == pytest.approx(1.0, abs=1e-12)


def test_metadata_block(write_config, capsys):
    run(["curve", "--config", str(write_config("method = master-od\n" + DAMPED))])
    header = [line for line in capsys.readouterr().out.splitlines() if line.startswith("#")]
    keys = {line[2:].split(" = ", 1)[0] for line in header}
    assert {"method", "kappa", "eta_hat", "n_trunc", "step", "version"} <= keys


def test_exact_and_master_curves_agree(write_config, capsys):
    run(["curve", "--config", str(write_config("method = exact\n" + DAMPED))])
    closed = _rows(capsys.readouterr().out)
    run(["curve", "--config", str(write_config("method = master-od\n" + DAMPED))])
    integrated = _rows(capsys.readouterr().out)
    diff = (closed[:, 1] - integrated[:, 1]) + 1j * (closed[:, 2] - integrated[:, 2])
    assert np.max(np.abs(diff)) < 1e-6


def test_seeded_trajectory_curves_are_identical(write_config, tmp_path):
    text = "method = unravel-linear\n" + DAMPED + f"n_traj = 32\ntraj_step = {2.0 * math.pi / 512!r}\n"
    config = str(write_config(text))
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["curve", "--config", config, "--seed", "42", "--out", str(first)]) == 0
    assert run(["curve", "--config", config, "--seed", "42", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert "visibility,stderr" in first.read_text()
    assert "# seed = 42" in first.read_text()


def test_params_csl(config_dir, capsys):
    assert run(["params", "--config", str(config_dir / "csl_cantilever.conf")]) == 0
    lines = dict(line.split(" = ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(lines["eta"].split()[0]) == pytest.approx(5.642e20, rel=1e-3)
    assert float(lines["Lambda"]) == pytest.approx(2.116e-9, rel=1e-3)
    assert float(lines["gamma_max"].split()[0]) == pytest.approx(9.453e-25, rel=1e-3)
    assert lines["eta"].endswith("s^-1 m^-2")


def test_params_grw(config_dir, capsys):
    assert run(["params", "--config", str(config_dir / "grw_cantilever.conf")]) == 0
    out = capsys.readouterr().out
    assert "eta = 1.500000e+13 s^-1 m^-2" in out


def test_params_reports_tolerated_eta(config_dir, capsys):
    assert run(["params", "--config", str(config_dir / "csl_cantilever.conf")]) == 0
    lines = dict(line.split(" = ", 1) for line in capsys.readouterr().out.splitlines())
    eta = float(lines["eta"].split()[0])
    eta_max = float(lines["eta_max"].split()[0])
    # Λ is linear in η, so the tolerated η scales Λ up to the accuracy
    assert eta_max == pytest.approx(eta * 0.002 / float(lines["Lambda"]), rel=1e-5)


def test_params_without_accuracy_omits_tolerated_eta(config_dir, capsys):
    assert run(["params", "--config", str(config_dir / "grw_cantilever.conf")]) == 0
    assert "eta_max" not in capsys.readouterr().out


def test_params_missing_side_exits_2(write_config, capsys):
    text = "omega_m = 3141.592653589793\nsigma = 1e-13\nkappa = 0.25\nmodel = CSL\ngamma_csl = 1e-30\nalpha = 1e10\ndensity_D = 1e24\n"
    assert run(["params", "--config", str(write_config(text))]) == 2
    err = capsys.readouterr().err
    assert "side_S" in err


def test_physical_config_drives_curve(config_dir, capsys):
    assert run(["curve", "--config", str(config_dir / "csl_cantilever.conf")]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[-1, 0] == pytest.approx(2.0 * math.pi)
    # damping at the experiment's true scale is Λ ≈ 2e-9
    assert 1.0 - rows[-1, 3] == pytest.approx(2.116e-9, rel=1e-2)


@pytest.mark.parametrize(
    "text",
    ["kappa = 0.25\nwavelength = 1\n", "eta_hat = 0.1\n", "kappa = 0.25\nmodel = GRW\n"],
)
def test_config_errors_exit_2(write_config, text):
    assert run(["curve", "--config", str(write_config(text))]) == 2


def test_missing_config_exits_2(tmp_path):
    assert run(["curve", "--config", str(tmp_path / "nope.conf")]) == 2


def test_numerical_failure_exits_3(write_config):
    text = "method = master-od\nkappa = 0.25\neta_hat = 0\nn_trunc = 64\nperiods = 4\nn_points = 3\nstep = 2.0\n"
    assert run(["curve", "--config", str(write_config(text))]) == 3


def test_truncation_sweep_command(write_config, capsys):
    text = UNITARY + "sweep_kind = truncation\nn_list = 4, 8, 16, 32\nn_points = 17\n"
    assert run(["sweep", "--config", str(write_config(text))]) == 0
    out = capsys.readouterr().out
    assert "pair 16 32 max_diff" in out
    converged = int(out.split("converged_n = ")[1].split()[0])
    assert converged <= 16


def test_step_sweep_command(write_config, capsys):
    text = DAMPED + "sweep_kind = step\nstep_list = 0.04908738521234052, 0.02454369260617026\n"
    assert run(["sweep", "--config", str(write_config(text))]) == 0
    out = capsys.readouterr().out
    assert out.count("max_error") == 2
    assert "ratio 0" in out


def test_validate_unitary_limit(write_config, capsys):
    assert run(["validate", "--config", str(write_config(UNITARY + "n_trunc = 24\n"))]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(": PASS " in line for line in lines) >= 8
    assert not any(": FAIL " in line for line in lines)
    assert not any("mc_" in line for line in lines)


def test_validate_flags_wrong_sign_damping(write_config, capsys):
    def wrong_sign(t, kappa, eta_hat):
        return exact.f_qm(t, kappa) * np.exp(3.0 * kappa**2 * eta_hat * exact.damping_envelope(t))

    text = DAMPED + f"n_traj = 16\ntraj_step = {2.0 * math.pi / 256!r}\n"
    cfg = load_run_config(write_config(text))
    with pytest.raises(ValidationFailure) as info:
        cmd_validate(cfg, oracle=wrong_sign)
    assert info.value.exit_code == 1
    assert "CHECK oracle_master_od: FAIL" in capsys.readouterr().out


@pytest.mark.slow
def test_validate_default_config(config_dir, capsys):
    assert run(["validate", "--config", str(config_dir / "default.conf")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sum(": PASS " in line for line in lines) >= 8
