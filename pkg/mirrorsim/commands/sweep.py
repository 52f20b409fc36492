import math

from mirrorsim.commands.common import add_common_arguments, emit_lines, sim_params
from mirrorsim.schemas import RunConfig, SweepKind
from mirrorsim.services import master, report

DEFAULT_STEPS = [2.0 * math.pi / 256, 2.0 * math.pi / 512, 2.0 * math.pi / 1024]


def cmd_sweep(cfg: RunConfig) -> int:
    params = sim_params(cfg)
    integrator = cfg.integrator_config()
    if cfg.sweep_kind is SweepKind.TRUNCATION:
        lines = report.truncation_lines(master.truncation_sweep(params, integrator, cfg.n_list))
    else:
        steps = cfg.step_list or DEFAULT_STEPS
        lines = report.step_lines(master.step_sweep(params, integrator, steps))
    emit_lines(cfg, lines)
    return 0


def register(subparsers):
    parser = subparsers.add_parser("sweep", help="truncation or step convergence study")
    add_common_arguments(parser)
    parser.set_defaults(handler=cmd_sweep)
