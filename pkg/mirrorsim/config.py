import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from mirrorsim import __version__
from mirrorsim.errors import ConfigError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    # Fock-space truncation
    leakage_tol: float = 1e-12
    default_n_trunc: int = 32

    # Master-equation integrator
    rk4_steps_per_period: int = 4096
    rk4_tol: float = 1e-9
    positivity_check_every: int = 64
    positivity_tol: float = 1e-6

    # Trajectory ensembles
    sde_steps_per_period: int = 8192
    default_n_traj: int = 10000
    trajectory_batch: int = 512
    max_workers: int = 1

    # Application Configuration
    app_name: str = "mirrorsim"
    version: str = __version__
    csv_digits: int = 17
    log_level: str = "INFO"
    debug: bool = False

    model_config = SettingsConfigDict(env_file=".env", env_prefix="MIRRORSIM_")


settings = Settings()


LIST_KEYS = {"n_list", "step_list"}


def parse_flat_config(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Parse `key = value` lines; `#` starts a comment."""
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key in LIST_KEYS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value
    return values


def load_run_config(path: Path, overrides: Optional[Dict[str, Any]] = None):
    """Read a flat run config and validate it into a RunConfig."""
    from mirrorsim.schemas import RunConfig

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e

    values = parse_flat_config(text, source=str(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    logger.debug(f"Loaded {len(values)} config keys from {path}")

    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(first_error_line(e)) from e


def first_error_line(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(part) for part in err.get("loc", ())) or "config"
    return f"{where}: {err['msg']}"
