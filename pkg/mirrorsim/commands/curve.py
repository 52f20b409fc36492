import logging

from mirrorsim.commands.common import add_common_arguments, output_stream, sim_params
from mirrorsim.schemas import CurveMethod, RunConfig, VisibilityCurve
from mirrorsim.services import exact, master, report, unravel

logger = logging.getLogger(__name__)


def build_curve(cfg: RunConfig) -> VisibilityCurve:
    """Evaluate f(t) on the configured grid by the configured method."""
    params = sim_params(cfg)
    method = cfg.method
    if method.closed_form:
        return exact.sample_curve(method, params)
    if method is CurveMethod.MASTER_FULL:
        return master.integrate_full(None, params, cfg.integrator_config())
    if method is CurveMethod.MASTER_OD:
        return master.integrate_od(params, cfg.integrator_config())
    if method is CurveMethod.UNRAVEL_LINEAR:
        return unravel.estimate_f_linear(params, cfg.trajectory_config()).to_curve()
    return unravel.estimate_f_qmupl(params, cfg.trajectory_config()).to_curve()


def cmd_curve(cfg: RunConfig) -> int:
    curve = build_curve(cfg)
    with output_stream(cfg) as stream:
        report.write_curve_csv(curve, stream)
    logger.info(f"{curve.method.value}: {len(curve.samples)} rows, final visibility {curve.nu_values[-1]:.6g}")
    return 0


def register(subparsers):
    parser = subparsers.add_parser("curve", help="write f(t) as CSV")
    add_common_arguments(parser)
    parser.set_defaults(handler=cmd_curve)
