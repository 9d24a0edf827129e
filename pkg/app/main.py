import logging
import sys
from typing import Optional

import click
from pydantic import ValidationError

from app.schemas import ContourSpec, JobSpec, SystemSpec
from app.services import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, run

LOG_FORMAT = "[%(module)-12s] %(message)s"


class DequantGroup(click.Group):
    """Command group mapping usage errors to exit code 1."""

    def main(self, *args, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            code = super().main(*args, standalone_mode=False, **kwargs)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(code or EXIT_OK)


def _systems(values) -> list:
    try:
        return [SystemSpec.parse(v) for v in values]
    except (ValueError, ValidationError) as exc:
        raise click.BadParameter(str(exc), param_hint="--system")


def _schedule(text: Optional[str]) -> Optional[list]:
    if text is None:
        return None
    try:
        return [int(n) for n in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {text!r}", param_hint="--schedule")


def _dispatch(command: str, output: Optional[str], **fields) -> int:
    fields = {k: v for k, v in fields.items() if v is not None}
    try:
        job = JobSpec(command=command, **fields)
    except ValidationError as exc:
        raise click.UsageError(str(exc))
    code, text = run(job)
    if code == EXIT_USAGE:
        raise click.UsageError(text)
    if code == EXIT_DOMAIN:
        click.echo(text, err=True, nl=False)
        return code
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        click.echo(text, nl=False)
    return code


def _contour(beta, t, theta) -> ContourSpec:
    try:
        return ContourSpec(beta=beta, T=t, theta=theta)
    except ValidationError as exc:
        raise click.BadParameter(str(exc), param_hint="--beta")


def common_options(function):
    options = [
        click.option("--system", "systems", multiple=True, help="boson, boson:D or spin:S; one per subsystem."),
        click.option("--format", "output_format", type=click.Choice(["json", "csv", "text"]), default="json"),
        click.option("--out", "output", type=click.Path(dir_okay=False), help="Write the result to a file."),
        click.option("--truncation", type=int, help="Fock cutoff D."),
    ]
    for option in reversed(options):
        function = option(function)
    return function


def contour_options(function):
    options = [
        click.option("--beta", type=float, default=0.0, show_default=True),
        click.option("--T", "t", type=float, default=0.0, show_default=True, help="Real-time extent."),
        click.option("--theta", type=float, help="Integral of the time profile; defaults to T."),
    ]
    for option in reversed(options):
        function = option(function)
    return function


@click.group(cls=DequantGroup)
@click.option("--verbose", is_flag=True, help="Log debug records.")
def cli(verbose: bool):
    """De-quantize operators and compare path-integral partition functions."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT, force=True)


@cli.command()
@click.option("--expr", "expression", required=True)
@click.option("--metaplectic", type=click.Choice(["on", "off"]), default="on", show_default=True)
@common_options
def dequantize(expression, metaplectic, systems, output_format, output, truncation):
    """Classical symbol of an operator expression."""
    if metaplectic == "off":
        click.echo("WARNING: metaplectic correction disabled; the symbol is a negative control.", err=True)
    return _dispatch("dequantize", output, expression=expression, systems=_systems(systems),
                     metaplectic=metaplectic == "on", output_format=output_format, truncation=truncation)


@cli.command()
@click.option("--symbol", required=True)
@common_options
def quantize(symbol, systems, output_format, output, truncation):
    """Differential form of a phase-space symbol."""
    return _dispatch("quantize", output, symbol=symbol, systems=_systems(systems), output_format=output_format,
                     truncation=truncation)


@cli.command()
@click.option("--expr", "expression", required=True)
@click.option("--method", type=click.Choice(["exact", "reduced-sum", "transfer", "all"]), default="all")
@click.option("--mode", type=click.Choice(["matrix-element", "normal-kernel", "diagonal-kernel"]),
              default="matrix-element")
@click.option("--slicing", type=click.Choice(["exponential", "linear"]), default="exponential")
@click.option("--slices", type=int, help="Number of slices N.")
@click.option("--schedule", help="Comma separated N values for the continuum limit.")
@click.option("--cutoff", type=int, help="Largest bosonic quantum number in reduced sums.")
@contour_options
@common_options
def partition(expression, method, mode, slicing, slices, schedule, cutoff, beta, t, theta, systems,
              output_format, output, truncation):
    """Partition function by exact trace, reduced sum or transfer matrix."""
    return _dispatch("partition", output, expression=expression, method=method, mode=mode, slicing=slicing,
                     slices=slices, schedule=_schedule(schedule), cutoff=cutoff, contour=_contour(beta, t, theta),
                     systems=_systems(systems), output_format=output_format, truncation=truncation)


@cli.command(name="slicing-compare")
@click.option("--expr", "expression", required=True)
@click.option("--schedule", help="Comma separated N values.")
@contour_options
@common_options
def slicing_compare(expression, schedule, beta, t, theta, systems, output_format, output, truncation):
    """Compare symbols and slicing prescriptions against the exact trace."""
    return _dispatch("slicing-compare", output, expression=expression, schedule=_schedule(schedule),
                     contour=_contour(beta, t, theta), systems=_systems(systems), output_format=output_format,
                     truncation=truncation)


@cli.command()
@common_options
def gvh(systems, output_format, output, truncation):
    """Report the cubic obstruction to a bracket-preserving quantization."""
    return _dispatch("gvh", output, output_format=output_format, truncation=truncation)


if __name__ == "__main__":
    cli()
