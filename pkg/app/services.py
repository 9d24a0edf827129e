import csv
import io
import json
import logging
import math
from typing import List, Optional, Tuple

from pydantic import BaseModel

from app.dependencies import get_executor
from app.dequant import (
    dequantize_extended, dequantize_operator, gvh_obstruction, manifold_for, normal_symbol, quantize,
)
from app.errors import DequantError, NotFirstOrder, Unsupported
from app.geom import Manifold
from app.opalg import BosonOperator, DifferentialForm, SpinOperator, Subsystem, TensorOperator
from app.parser import parse_expression, render_operator
from app.pathint import (
    PartitionResult, TimeContour, continuum_limit, exact_partition, reduced_sum_partition,
    slicing_compare, transfer_partition,
)
from app.schemas import (
    DequantizeResponse, ErrorResponse, GvhResponse, JobSpec, PartitionResponse, PartitionRow,
    QuantizeResponse, VectorFieldOut, finite, pair,
)
from app.symcore import PhaseSymbol, gauss, gauss_sympy, parse_symbol

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2

GVH_TRUNCATION = 30


def _require(value: Optional[str], option: str) -> str:
    if not value:
        raise ValueError(f"{option} is required for this command")
    return value


def _operator(job: JobSpec) -> TensorOperator:
    return parse_expression(_require(job.expression, "--expr"), job.subsystems())


def dequantize_job(job: JobSpec) -> DequantizeResponse:
    """
    De-quantize an operator expression.

    Single-subsystem first-order operators go through the inverse of the
    half-form map and report their Hamiltonian vector field; everything else
    goes through the generator expansion.

    Args:
        job (JobSpec): The request.

    Returns:
        DequantizeResponse: The canonical symbol text.

    Raises:
        Unsupported: If ``metaplectic`` is off for an operator outside the
            first-order single-subsystem family.
    """
    op = _operator(job)
    systems = [s.label() for s in op.systems]
    if not job.metaplectic:
        if op.arity != 1:
            raise Unsupported("the prequantum control needs a single subsystem", subexpression=job.expression)
        try:
            result = dequantize_operator(op, metaplectic=False)
        except NotFirstOrder as exc:
            raise Unsupported("the prequantum control needs a first-order operator",
                              subexpression=exc.subexpression)
        field = VectorFieldOut(xi_z=result.field.xi_z.render(), xi_zbar=result.field.xi_zbar.render())
        return DequantizeResponse(expression=job.expression, systems=systems, symbol=result.symbol.render(),
                                  field=field, polarization_ok=result.polarization_ok, metaplectic=False)
    if op.arity == 1:
        try:
            result = dequantize_operator(op)
        except NotFirstOrder:
            logger.info("operator is not first order, using the generator expansion")
        else:
            field = VectorFieldOut(xi_z=result.field.xi_z.render(), xi_zbar=result.field.xi_zbar.render())
            spectral = _spectral_text(op)
            return DequantizeResponse(expression=job.expression, systems=systems, symbol=result.symbol.render(),
                                      spectral=spectral, field=field, polarization_ok=result.polarization_ok)
    symbol = dequantize_extended(op)
    spectral = symbol.render_spectral() if all(v.rule is not None for v in symbol.variables) else None
    return DequantizeResponse(expression=job.expression, systems=systems, symbol=symbol.render(),
                              spectral=spectral)


def _spectral_text(op: TensorOperator) -> Optional[str]:
    try:
        symbol = dequantize_extended(op)
    except DequantError:
        return None
    if not symbol.variables or any(v.rule is None for v in symbol.variables):
        return None
    return symbol.render_spectral()


def _form_operator(form: DifferentialForm, manifold: Manifold) -> Optional[TensorOperator]:
    # ad^p a^q has the form z^q d^p; on the sphere the first-order forms are affine in Sz
    if manifold.kind == "plane":
        total = BosonOperator()
        for p, coeff in enumerate(form.coeffs):
            for (q, b), c in coeff.terms():
                if b or coeff.denom_power:
                    return None
                total = total + BosonOperator({(p, q): c})
        return TensorOperator.single(total)
    if form.order > 1 or form.v.denom_power or form.c.denom_power:
        return None
    slope = form.c.holomorphic_coefficients()
    if form.c.is_zero:
        scale = 0
    elif set(slope) == {1}:
        scale = -slope[1]
    else:
        return None
    offset = form.v - PhaseSymbol.constant(gauss(manifold.spin)) * scale if scale else form.v
    if not offset.is_constant():
        return None
    op = SpinOperator.sz(manifold.spin) * scale + offset.constant_value()
    return TensorOperator.single(op)


def quantize_job(job: JobSpec) -> QuantizeResponse:
    """Quantize a phase-space symbol into its holomorphic differential form."""
    symbol = parse_symbol(_require(job.symbol, "--symbol"))
    systems = job.subsystems() or [Subsystem.boson()]
    if len(systems) != 1:
        raise Unsupported("quantize works on one subsystem")
    manifold = manifold_for(systems[0])
    form = quantize(symbol, manifold, job.metaplectic)
    op = _form_operator(form, manifold)
    return QuantizeResponse(symbol=symbol.render(), manifold=manifold.label(), form=[c.render() for c in form.coeffs],
                            operator=render_operator(op) if op is not None else None, metaplectic=job.metaplectic)


def _kernel_target(op: TensorOperator, mode: str):
    if op.arity != 1:
        raise Unsupported(f"{mode} slices need a single subsystem")
    if mode == "normal-kernel":
        return normal_symbol(op)
    return dequantize_extended(op).to_phase_symbol()


def _transfer(job: JobSpec, op: TensorOperator, contour: TimeContour, executor) -> List[PartitionResult]:
    truncation = job.fock_truncation()
    if job.mode == "matrix-element":
        target, manifold = op, None
    else:
        target, manifold = _kernel_target(op, job.mode), manifold_for(op.systems[0])
    if job.slices is not None:
        return [transfer_partition(target, contour, job.slices, truncation, job.mode, job.slicing, manifold,
                                   executor)]
    return [continuum_limit(target, contour, job.mode, job.schedule, truncation, manifold, job.slicing, executor)]


def _rows(results: List[PartitionResult], reference: Optional[complex]) -> List[PartitionRow]:
    rows = []
    for result in results:
        error = phase = None
        if reference is not None:
            error = abs(result.value - reference)
            if reference:
                phase = math.atan2((result.value / reference).imag, (result.value / reference).real)
        rows.append(PartitionRow(method=result.name, value=pair(result.value), abs_err_vs_exact=finite(error),
                                 phase_offset=finite(phase)))
    return rows


def partition_job(job: JobSpec) -> PartitionResponse:
    """
    Partition function of an operator by the requested method.

    ``all`` gives the exact trace and the reduced sum of the corrected symbol,
    plus a transfer-matrix row when ``slices`` is set.
    """
    op = _operator(job)
    contour = job.contour.contour()
    results: List[PartitionResult] = []
    reference = None
    with get_executor() as executor:
        if job.method in ("exact", "all"):
            exact = exact_partition(op, contour, job.fock_truncation())
            reference = exact.value
            results.append(exact)
        if job.method in ("reduced-sum", "all"):
            symbol = dequantize_extended(op)
            results.append(reduced_sum_partition(symbol, contour, job.cutoff))
        if job.method == "transfer" or (job.method == "all" and job.slices is not None):
            results.extend(_transfer(job, op, contour, executor))
    return PartitionResponse(command="partition", expression=job.expression, contour=job.contour,
                             rows=_rows(results, reference))


def slicing_compare_job(job: JobSpec) -> PartitionResponse:
    op = _operator(job)
    with get_executor() as executor:
        table = slicing_compare(op, job.contour.contour(), job.schedule, job.fock_truncation(), executor)
    rows = [PartitionRow(method=row.method, value=pair(row.value), abs_err_vs_exact=finite(row.abs_err_vs_exact),
                         phase_offset=finite(row.phase_offset)) for row in table]
    return PartitionResponse(command="slicing-compare", expression=job.expression, contour=job.contour, rows=rows)


def gvh_job(job: JobSpec) -> GvhResponse:
    truncation = job.truncation or GVH_TRUNCATION
    report = gvh_obstruction(truncation)
    return GvhResponse(
        quadratic_homomorphism_ok=report.quadratic_homomorphism_ok,
        complex_quadratic_ok=report.complex_quadratic_ok,
        residual_is_scalar=report.residual_is_scalar,
        residual_value=pair(complex(float(report.residual_value.x), float(report.residual_value.y))),
        residual_exact=str(gauss_sympy(report.residual_value)),
        truncation=truncation,
        matrix_max_deviation=finite(report.matrix_max_deviation),
    )


HANDLERS = {
    "dequantize": dequantize_job,
    "quantize": quantize_job,
    "partition": partition_job,
    "slicing-compare": slicing_compare_job,
    "gvh": gvh_job,
}


# -- output -------------------------------------------------------------------------

def _json_float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = f"{value + 0.0:.17g}"
    return text if "." in text or "e" in text else f"{text}.0"


def _json_text(value, indent: str) -> str:
    inner = indent + "  "
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(key)}: {_json_text(item, inner)}" for key, item in value.items()]
        return "{\n" + ",\n".join(items) + f"\n{indent}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_text(item, inner) for item in value) + f"\n{indent}]"
    if isinstance(value, float):
        return _json_float(value)
    return json.dumps(value)


def render_json(model: BaseModel) -> str:
    """
    Two-space indented JSON in field order with every float written to 17
    significant digits, so equal results give identical bytes.
    """
    return _json_text(model.model_dump(mode="json"), "") + "\n"



def render_csv(model: BaseModel) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    data = model.model_dump(mode="json")
    if "rows" in data:
        writer.writerow(["method", "value_re", "value_im", "abs_err_vs_exact", "phase_offset"])
        for row in data["rows"]:
            writer.writerow([row["method"], *row["value"], row["abs_err_vs_exact"], row["phase_offset"]])
    else:
        writer.writerow(["field", "value"])
        for key, value in data.items():
            writer.writerow([key, json.dumps(value) if isinstance(value, (dict, list)) else value])
    return buffer.getvalue()


def _number(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.12g}"


def render_text(model: BaseModel) -> str:
    data = model.model_dump(mode="json")
    if "rows" not in data:
        return "\n".join(f"{key}: {value}" for key, value in data.items()) + "\n"
    width = max([len("method")] + [len(row["method"]) for row in data["rows"]])
    lines = [f"{'method':<{width}}  {'Re Z':>20}  {'Im Z':>20}  {'|Z - Z_exact|':>14}  {'phase':>12}"]
    for row in data["rows"]:
        re, im = row["value"]
        lines.append(f"{row['method']:<{width}}  {re:>20.14g}  {im:>20.14g}  "
                     f"{_number(row['abs_err_vs_exact']):>14}  {_number(row['phase_offset']):>12}")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "text": render_text}


def run(job: JobSpec) -> Tuple[int, str]:
    """
    Execute one job.

    Args:
        job (JobSpec): The validated request.

    Returns:
        Tuple[int, str]: Exit code and text. Success gives ``0`` and the
        rendered response; a domain error gives ``2`` and a JSON error
        record; a missing option gives ``1``.
    """
    try:
        response = HANDLERS[job.command](job)
    except DequantError as exc:
        logger.debug("job failed with %s", exc.name)
        record = ErrorResponse(error=exc.name, detail=exc.detail, subexpression=exc.subexpression)
        return EXIT_DOMAIN, render_json(record)
    except ValueError as exc:
        return EXIT_USAGE, str(exc)
    return EXIT_OK, RENDERERS[job.output_format](response)
