from mirrorsim.commands.common import add_common_arguments, emit_lines, physical_params
from mirrorsim.errors import ConfigError
from mirrorsim.schemas import ModelTag, RunConfig
from mirrorsim.services import collapse, report


def cmd_params(cfg: RunConfig) -> int:
    """Print η, Λ and, given an accuracy, the largest tolerated η plus (CSL) the γ bound."""
    spec = cfg.collapse_spec()
    if spec is None:
        raise ConfigError("params needs model = GRW | QMUPL | CSL | direct")
    p = physical_params(cfg, required=True)

    estimate = collapse.estimate(spec, p, cfg.accuracy)
    bound = None
    nucleons = None
    if spec.model is ModelTag.CSL:
        nucleons = collapse.nucleon_count(spec)
        if cfg.accuracy is not None:
            bound = collapse.gamma_bound(cfg.accuracy, p, spec)
    emit_lines(cfg, report.params_lines(estimate, bound, nucleons))
    return 0


def register(subparsers):
    parser = subparsers.add_parser("params", help="collapse-model strengths and bounds")
    add_common_arguments(parser)
    parser.set_defaults(handler=cmd_params)
