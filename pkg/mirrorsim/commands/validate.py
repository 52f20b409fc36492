import logging

from mirrorsim.commands.common import add_common_arguments, emit_lines, sim_params
from mirrorsim.errors import ValidationFailure
from mirrorsim.schemas import RunConfig
from mirrorsim.services import acceptance, exact, report

logger = logging.getLogger(__name__)


def cmd_validate(cfg: RunConfig, oracle: acceptance.Oracle = exact.f_exact) -> int:
    """Run the acceptance battery; exit 1 if any check fails."""
    params = sim_params(cfg)
    results = acceptance.run_battery(
        params.kappa,
        params.eta_hat,
        params.n_trunc,
        cfg.integrator_config(),
        cfg.trajectory_config(),
        oracle=oracle,
    )
    emit_lines(cfg, report.check_lines(results))

    failed = [result.name for result in results if not result.passed]
    logger.info(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        raise ValidationFailure(f"failed checks: {', '.join(failed)}")
    return 0


def register(subparsers):
    parser = subparsers.add_parser("validate", help="cross-method acceptance checks")
    add_common_arguments(parser)
    parser.set_defaults(handler=cmd_validate)
