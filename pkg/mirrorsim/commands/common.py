import argparse
import logging
import sys
from contextlib import contextmanager
from typing import IO, Iterable, Iterator, Optional

import numpy as np
from pydantic import ValidationError

from mirrorsim.config import first_error_line
from mirrorsim.errors import ConfigError
from mirrorsim.schemas import PhysicalParams, RunConfig, SimParams
from mirrorsim.services import collapse
from mirrorsim.services.core import nondimensionalize

logger = logging.getLogger(__name__)


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="flat key = value run config")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--seed", type=int, default=None, help="override the trajectory seed")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def physical_params(cfg: RunConfig, required: bool = False) -> Optional[PhysicalParams]:
    """SI parameters with η resolved from the collapse model when one is configured."""
    try:
        p = cfg.physical_params()
    except ValidationError as e:
        raise ConfigError(first_error_line(e)) from e
    if p is None:
        if required:
            raise ConfigError("omega_m with sigma (or mass) and kappa (or coupling_G) is required")
        return None

    spec = cfg.collapse_spec()
    if spec is not None:
        if cfg.eta is not None:
            raise ConfigError("give either eta or a collapse model, not both")
        p = p.model_copy(update={"eta": collapse.eta_for_model(spec)})
    return p


def sim_params(cfg: RunConfig) -> SimParams:
    """Dimensionless parameters and time grid for the physics modules."""
    p = physical_params(cfg)
    if p is None:
        if cfg.kappa is None:
            raise ConfigError("kappa is required (or physical parameters with omega_m)")
        if cfg.model is not None:
            raise ConfigError("a collapse model needs physical parameters (omega_m, sigma or mass)")
        return SimParams.over_periods(cfg.kappa, cfg.eta_hat or 0.0, cfg.n_trunc, cfg.periods, cfg.n_points)

    if cfg.eta_hat is not None:
        raise ConfigError("give either eta_hat or physical eta, not both")
    seconds = np.linspace(0.0, cfg.periods * p.period, cfg.n_points)
    sim = nondimensionalize(p, cfg.n_trunc, seconds)
    logger.debug(f"Nondimensionalized: kappa={sim.kappa:.6g} eta_hat={sim.eta_hat:.6e}")
    return sim


@contextmanager
def output_stream(cfg: RunConfig) -> Iterator[IO[str]]:
    if cfg.out is None:
        yield sys.stdout
        return
    try:
        with open(cfg.out, "w", encoding="utf-8", newline="") as stream:
            yield stream
    except OSError as e:
        raise ConfigError(f"cannot write {cfg.out}: {e.strerror}") from e
    logger.info(f"Wrote {cfg.out}")


def emit_lines(cfg: RunConfig, lines: Iterable[str]):
    with output_stream(cfg) as stream:
        for line in lines:
            stream.write(line + "\n")
