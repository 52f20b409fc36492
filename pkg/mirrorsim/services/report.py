"""CSV and text report formatting. Output is locale independent and byte-stable."""

import csv
import io
import json
from typing import IO, Any, Iterable, List, Optional

from mirrorsim.config import settings
from mirrorsim.schemas import (
    CheckResult,
    CollapseEstimate,
    GammaBound,
    StepReport,
    TruncationReport,
    VisibilityCurve,
)

CSV_HEADER = ["t_rad", "re_f", "im_f", "visibility"]


def fmt(value: float) -> str:
    return format(float(value), f".{settings.csv_digits}g")


def _meta_value(value: Any) -> str:
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_curve_csv(curve: VisibilityCurve, stream: IO[str]) -> None:
    """Leading `#` metadata lines, then one row per grid point."""
    with_stderr = any(sample.stderr is not None for sample in curve.samples)
    stream.write(f"# method = {curve.method.value}\n")
    for key in sorted(curve.meta):
        stream.write(f"# {key} = {_meta_value(curve.meta[key])}\n")
    stream.write(f"# version = {settings.app_name} {settings.version}\n")

    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER + (["stderr"] if with_stderr else []))
    for sample in curve.samples:
        row = [fmt(sample.t), fmt(sample.f.real), fmt(sample.f.imag), fmt(sample.nu)]
        if with_stderr:
            row.append(fmt(sample.stderr if sample.stderr is not None else 0.0))
        writer.writerow(row)


def curve_to_csv(curve: VisibilityCurve) -> str:
    buffer = io.StringIO()
    write_curve_csv(curve, buffer)
    return buffer.getvalue()


def read_curve_csv(text: str) -> List[List[float]]:
    """Numeric rows of a curve CSV, skipping metadata and header."""
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    return [[float(cell) for cell in row] for row in csv.reader(lines[1:])]


def params_lines(
    estimate: CollapseEstimate,
    bound: Optional[GammaBound] = None,
    nucleons: Optional[float] = None,
) -> List[str]:
    lines = [
        f"model = {estimate.model.value}",
        f"eta = {estimate.eta_si:.6e} s^-1 m^-2",
        f"eta_cgs = {estimate.eta_cgs:.6e} s^-1 cm^-2",
    ]
    if estimate.lambda_ is not None:
        lines.append(f"Lambda = {estimate.lambda_:.6e}")
    if estimate.eta_max is not None:
        lines.append(f"eta_max = {estimate.eta_max:.6e} s^-1 m^-2")
    if nucleons is not None:
        lines.append(f"nucleons_DS3 = {nucleons:.6e}")
    if bound is not None:
        lines.extend(
            [
                f"accuracy = {bound.accuracy:.6g}",
                f"gamma_max = {bound.gamma_max:.6e} cm^3 s^-1",
                f"gamma_ref_fullerene = {bound.reference_fullerene:.6e} cm^3 s^-1",
                f"gamma_decades_from_conventional = {bound.orders_from_decisive:.3f}",
            ]
        )
    return lines


def truncation_lines(report: TruncationReport) -> List[str]:
    lines = [f"pair {p.n_low} {p.n_high} max_diff = {p.max_diff:.6e}" for p in report.pairs]
    lines.append(f"tol = {report.tol:.6e}")
    lines.append(f"converged_n = {report.converged_n}")
    return lines


def step_lines(report: StepReport) -> List[str]:
    lines = [f"step {fmt(s)} max_error = {e:.6e}" for s, e in zip(report.steps, report.max_errors)]
    lines.extend(
        f"ratio {i} = {r:.4f} order = {o:.3f}"
        for i, (r, o) in enumerate(zip(report.ratios, report.observed_orders))
    )
    return lines


def check_lines(results: Iterable[CheckResult]) -> List[str]:
    return [result.line() for result in results]
