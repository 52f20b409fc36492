from pathlib import Path

import pytest

from mirrorsim.schemas import SimParams

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def damped_params():
    """κ = 0.25, η̂ = 0.1 over one period on a 65-point grid."""
    return SimParams.over_periods(0.25, 0.1, n_trunc=24, periods=1.0, n_points=65)


@pytest.fixture
def unitary_params():
    return SimParams.over_periods(0.25, 0.0, n_trunc=24, periods=1.0, n_points=65)


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str, name: str = "run.conf") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write

