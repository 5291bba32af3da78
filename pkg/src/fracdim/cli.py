"""Command-line front end: certified bounds, parameter sweeps, and
matrix-family entropy tables.

Output discipline is machine-readable first (a CSV block or JSON), pretty
text second, numeric fields at 15 significant digits.  Every file the CLI
writes gets a sibling ``<path>.manifest.json`` recording the exact command,
the parameters as the strings they were given as, the package version,
elapsed wall time, and a sha256 per output file, so any emitted table row
is traceable to the run that produced it.

Exit codes: 0 success, 1 usage, 2 resource or precondition failure,
3 certification failure (some requested bound could not be certified).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import click

from .entropy_bounds import dimension_lower_bound
from .errors import CertificationError, FracdimError, ResourceLimitError
from .ifs import attractor_hull, parse_ifs_file
from .measure_bounds import UBConfig
from .pisot import construct_family, dim_upper_table, load_family
from .sweep import (DEFAULT_THRESHOLD, expand_schedule, parse_schedule_csv,
                    rows_csv_text, run_schedule, validate_schedule,
                    write_plot_csv, write_rows_csv)

__all__ = ["RunManifest", "cli", "main"]

try:
    from importlib.metadata import version as _pkg_version
    _VERSION = _pkg_version("fracdim")
except Exception:  # not installed (e.g. run from a checkout)
    _VERSION = "0+uninstalled"


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    """Provenance for one CLI run: what was asked, what came out."""

    command: str
    parameters: Dict[str, str]
    version: str
    elapsed_seconds: float
    outputs: Dict[str, str]  # path -> sha256 of the written bytes

    def to_json(self) -> str:
        return json.dumps({
            "command": self.command,
            "parameters": self.parameters,
            "version": self.version,
            "elapsed_seconds": self.elapsed_seconds,
            "outputs": self.outputs,
        }, indent=2)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(command: str, parameters: Dict[str, str], t0: float,
                    outputs: List[str], stable: bool) -> None:
    """Sibling manifest next to the first output; no outputs, no manifest."""
    if not outputs:
        return
    manifest = RunManifest(
        command=command,
        parameters=parameters,
        version=_VERSION,
        elapsed_seconds=0.0 if stable else time.monotonic() - t0,
        outputs={p: _sha256(p) for p in outputs},
    )
    with open(outputs[0] + ".manifest.json", "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json() + "\n")


def _stable_mode(flag: bool) -> bool:
    return flag or os.environ.get("FRACDIM_STABLE", "") not in ("", "0")


def _parse_gamma(text: str) -> Optional[float]:
    """'auto' defers to the engine default; anything else must be a decimal
    string (scientific notation allowed), converted exactly then rounded."""
    if text == "auto":
        return None
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(
            f"expected 'auto' or a decimal string, got {text!r}",
            param_hint="--gamma")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(_VERSION, prog_name="fracdim")
def cli() -> None:
    """Certified dimension bounds for self-similar measures with overlaps."""


@cli.command("lower")
@click.argument("ifs_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", "-N", "level", type=int, required=True,
              help="Cylinder partition depth.")
@click.option("--mode", type=click.Choice(["exact", "alg38"]),
              default="exact", show_default=True,
              help="Per-cell measure backend.")
@click.option("--depth", "-L", "depth", type=int, default=40,
              show_default=True,
              help="Recursion depth of the alg38 measure queries.")
@click.option("--gamma", default="auto", show_default=True,
              help="Preimage inflation factor (decimal string or 'auto').")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel per-cell measure queries.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the full JSON report here.")
@click.option("--stable", is_flag=True,
              help="Zero timings in outputs so reruns diff clean.")
def cmd_lower(ifs_file: str, level: int, mode: str, depth: int, gamma: str,
              jobs: int, out: Optional[str], stable: bool) -> int:
    """Certified dimension lower bound for the system in IFS_FILE."""
    t0 = time.monotonic()
    ifs = parse_ifs_file(ifs_file)
    cfg = UBConfig(B=attractor_hull(ifs), L=depth, gamma=_parse_gamma(gamma))
    report = dimension_lower_bound(ifs, level, measure_mode=mode, cfg=cfg,
                                   jobs=jobs)

    click.echo("dim_lower,conditional_upper,numerator_entropy,lyapunov,"
               "cells,mode")
    click.echo(",".join([
        "%.15g" % report.dim_lower,
        "%.15g" % report.conditional_upper.value,
        "%.15g" % report.numerator_entropy.value,
        "%.15g" % report.lyapunov,
        str(report.partition_cells),
        report.measure_mode,
    ]))
    click.echo("dimension lower bound: %.15g" % report.dim_lower)
    click.echo("ledger: summation error <= %.5g" % report.summation_error)

    outputs = []
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        outputs.append(out)
    _write_manifest(
        "lower", {
            "ifs_file": ifs_file, "level": str(level), "mode": mode,
            "depth": str(depth), "gamma": gamma, "jobs": str(jobs),
        }, t0, outputs, _stable_mode(stable))
    return 0


@cli.command("sweep")
@click.argument("schedule_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Cells bounded in parallel.")
@click.option("--threshold", type=float, default=DEFAULT_THRESHOLD,
              show_default=True,
              help="Cells whose bound drops below this are exceptional.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the per-cell rows CSV here.")
@click.option("--plot-out", type=click.Path(dir_okay=False), default=None,
              help="Write (midpoint, bound) pairs here.")
@click.option("--stable", is_flag=True,
              help="Zero timings in outputs so reruns diff clean.")
def cmd_sweep(schedule_file: str, jobs: int, threshold: float,
              out: Optional[str], plot_out: Optional[str],
              stable: bool) -> int:
    """Uniform bounds over every cell of the schedule in SCHEDULE_FILE."""
    t0 = time.monotonic()
    stable = _stable_mode(stable)
    bands = parse_schedule_csv(schedule_file)
    validate_schedule(bands)
    cells = expand_schedule(bands)
    rows, summary = run_schedule(cells, threshold=threshold, jobs=jobs)

    outputs = []
    if out is not None:
        write_rows_csv(rows, out, stable=stable)
        outputs.append(out)
    else:
        click.echo(rows_csv_text(rows, stable=stable), nl=False)
    if plot_out is not None:
        write_plot_csv(rows, plot_out)
        outputs.append(plot_out)

    if summary.vacuous:
        click.echo("vacuous schedule: no cells to bound")
    else:
        click.echo("cells: %d  failed: %d  certified: %s"
                   % (len(rows), summary.failed,
                      "yes" if summary.certified else "no"))
        if summary.minimum is not None:
            click.echo("minimum bound: %.15g at beta = %.15g"
                       % (summary.minimum, summary.argmin_beta))
        if summary.exceptional:
            lo, hi = summary.exceptional_range
            click.echo("exceptional cells (bound < %.15g): %d covering "
                       "[%.15g, %.15g]"
                       % (threshold, len(summary.exceptional), lo, hi))
        else:
            click.echo("exceptional cells (bound < %.15g): none" % threshold)

    _write_manifest(
        "sweep", {
            "schedule_file": schedule_file, "jobs": str(jobs),
            "threshold": "%.15g" % threshold,
        }, t0, outputs, stable)
    return 3 if summary.failed else 0


@cli.command("pisot")
@click.argument("family_file", type=click.Path(exists=True, dir_okay=False),
                required=False)
@click.option("--construct", "construct_poly", default=None, metavar="COEFFS",
              help="Build the family from monic integer coefficients, "
                   "highest degree first, comma-separated (1,-1,0,-1).")
@click.option("--beta", "beta_text", default=None,
              help="Denominator parameter as a decimal string "
                   "(default: the value recorded in the family file).")
@click.option("--level", "-N", "level", type=int, default=8,
              show_default=True,
              help="Deepest entropy increment to compute.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the level table CSV here.")
@click.option("--stable", is_flag=True,
              help="Zero timings in outputs so reruns diff clean.")
def cmd_pisot(family_file: Optional[str], construct_poly: Optional[str],
              beta_text: Optional[str], level: int, out: Optional[str],
              stable: bool) -> int:
    """Dimension upper-bound table from a matrix family.

    Reads FAMILY_FILE, or builds the family from a minimal polynomial
    with --construct.
    """
    t0 = time.monotonic()
    if (family_file is None) == (construct_poly is None):
        raise click.UsageError(
            "give exactly one of FAMILY_FILE or --construct")
    if family_file is not None:
        family = load_family(family_file)
        source = family_file
    else:
        try:
            coeffs = [int(c) for c in construct_poly.split(",")]
        except ValueError:
            raise click.BadParameter(
                f"expected comma-separated integers, got {construct_poly!r}",
                param_hint="--construct")
        family = construct_family(coeffs, experimental_ok=True)
        source = "construct:" + construct_poly
    beta = beta_text if beta_text is not None else family.beta_hint
    if beta is None:
        raise click.UsageError(
            "the family records no parameter value; pass --beta")

    table = dim_upper_table(family, Fraction(beta), level)
    click.echo("level,entropy_increment,dim_upper")
    for lvl, u_up, bound in table:
        click.echo("%d,%.15g,%.15g" % (lvl, u_up, bound))
    click.echo("upper bound at level %d: %.15g" % (level, table[-1][2]))

    outputs = []
    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write("level,entropy_increment,dim_upper\r\n")
            for lvl, u_up, bound in table:
                fh.write("%d,%.15g,%.15g\r\n" % (lvl, u_up, bound))
        outputs.append(out)
    _write_manifest(
        "pisot", {
            "source": source, "beta": str(beta), "level": str(level),
        }, t0, outputs, _stable_mode(stable))
    return 0


# ---------------------------------------------------------------------------
# entry point with the documented exit-code mapping
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ResourceLimitError as exc:
        click.echo(f"resource limit: {exc}", err=True)
        return 2
    except CertificationError as exc:
        click.echo(f"certification failure: {exc}", err=True)
        return 3
    except FracdimError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    raise SystemExit(main())
