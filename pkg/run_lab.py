#!/usr/bin/env python3
"""
Command-line runner for the protective put lab.

Usage: python run_lab.py <command> [options]
Example: python run_lab.py price --scenario D --instance 1 --source analytic
"""
import functools
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
import pandas as pd

from put_insurance_lab import UNDEFINED_LAMBDA, PutInsuranceLab
from src.lab_errors import ConfigParseError, ValidationError
from src.report_functions import report_to_json
from src.strategy_functions import DEFAULT_TOLERANCE

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_MISMATCH = 3


def _configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


_SHARED_OPTIONS = (
    click.option("--config", "config_path", default=None, help="Lab config (.toml, .yaml)"),
    click.option("--seed", type=int, default=None, help="Monte Carlo seed; overrides PUTLAB_SEED and the config"),
    click.option("--reps", type=int, default=None, help="Monte Carlo replications"),
    click.option("--out", "out_dir", default=None, help="Output directory"),
    click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None,
                 help="json (default) or csv"),
    click.option("--verbose", is_flag=True, help="Log progress at INFO level"),
)

_SHARED_NAMES = ("config_path", "seed", "reps", "out_dir", "fmt")


def shared_options(function):
    for option in reversed(_SHARED_OPTIONS):
        function = option(function)
    return function


def lab_options(command):
    """
    Options every subcommand accepts, before or after the subcommand name.

    A value given after the subcommand wins over one given before it.
    """
    @shared_options
    @click.pass_context
    @functools.wraps(command)
    def wrapper(ctx, config_path, seed, reps, out_dir, fmt, verbose, **kwargs):
        given = dict(config_path=config_path, seed=seed, reps=reps, out_dir=out_dir, fmt=fmt)
        group = ctx.find_object(dict) or {}
        merged = {name: given[name] if given[name] is not None else group.get(name) for name in _SHARED_NAMES}
        _configure_logging(verbose or bool(group.get("verbose")))
        return command(**merged, **kwargs)
    return wrapper


def _lab(config_path, seed, reps, workers=None) -> PutInsuranceLab:
    return PutInsuranceLab.from_file(config_path, seed=seed, replications=reps, workers=workers)


def _emit(data, records: List[dict], fmt: str, out_dir: Optional[str], name: str):
    """JSON of data or CSV of records, to stdout or <out>/<name>.<fmt>."""
    if fmt in (None, "json"):
        fmt = "json"
        text = report_to_json(data)
    else:
        text = pd.DataFrame(records).to_csv(index=False, lineterminator="\n")

    if out_dir is None:
        click.echo(text, nl=False)
        return
    path = Path(out_dir) / f"{name}.{fmt}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    click.echo(f"✓ Wrote {path}", err=True)


@click.group()
@shared_options
@click.pass_context
def cli(ctx, config_path, seed, reps, out_dir, fmt, verbose):
    """Protective put portfolio-insurance lab."""
    ctx.obj = dict(config_path=config_path, seed=seed, reps=reps, out_dir=out_dir, fmt=fmt, verbose=verbose)


@cli.command()
@lab_options
@click.option("--scenario", required=True, help="Scenario name, e.g. D")
@click.option("--instance", "ordinal", type=int, required=True, help="Instance ordinal, e.g. 1")
@click.option("--source", type=click.Choice(["analytic", "monte_carlo", "paper_fixed"]),
              default="analytic", show_default=True)
def price(config_path, seed, reps, out_dir, fmt, scenario, ordinal, source):
    """Put price of one (scenario, instance) cell."""
    lab = _lab(config_path, seed, reps)
    result = lab.price(scenario, ordinal, source)
    if out_dir is None and fmt is None:
        click.echo(f"{result['put_price']:.4f}")
        return EXIT_OK
    _emit(result, [{"scenario": scenario, "instance": ordinal, "source": source,
                    "put_price": result["put_price"]}], fmt, out_dir, "price")
    return EXIT_OK


@cli.command()
@lab_options
@click.option("--workers", type=int, default=None, help="Monte Carlo threads")
def suite(config_path, seed, reps, out_dir, fmt, workers):
    """A1/A2 comparison for every configured cell."""
    lab = _lab(config_path, seed, reps, workers)
    result = lab.suite()
    frame = result.to_frame()
    _emit({"source": result.source.describe(), "cells": frame.to_dict(orient="records")},
          frame.to_dict(orient="records"), fmt, out_dir, "suite")
    return EXIT_OK


@cli.command()
@lab_options
@click.option("--move", type=float, default=5.0, show_default=True, help="Symmetric move ds")
@click.option("--premium", type=float, default=1.0, show_default=True, help="Call premium C")
@click.option("--forbid-negative-premium", is_flag=True, help="Reject a negative parity-derived put premium")
def theorem(config_path, seed, reps, out_dir, fmt, move, premium, forbid_negative_premium):
    """Preference ordering of calls and puts across the U, N and D spaces."""
    lab = _lab(config_path, seed, reps)
    report = lab.theorem(move, premium, allow_negative_premium=not forbid_negative_premium)
    records = []
    for kind, pre, floored in (("call", report.call_pre_floor, report.call_floored),
                               ("put", report.put_pre_floor, report.put_floored)):
        for space in ("U", "N", "D"):
            records.append({"kind": kind, "space": space, "pre_floor": pre[space], "floored": floored[space]})
    _emit(report.to_dict(), records, fmt, out_dir, "theorem")
    return EXIT_OK


@cli.command()
@lab_options
@click.option("--as-printed", is_flag=True, help="Fit the printed excess equities")
def fit(config_path, seed, reps, out_dir, fmt, as_printed):
    """Quadratic utility fit and analysis per scenario."""
    lab = _lab(config_path, seed, reps)
    pipelines = lab.fit(as_printed=as_printed)
    records = []
    for pipeline in pipelines:
        coefficients = pipeline.fit.to_dict() if pipeline.fit is not None else {"a2": None, "a1": None, "a0": None}
        records.append({
            "scenario": pipeline.scenario,
            "pipeline": pipeline.pipeline,
            "status": pipeline.status,
            **coefficients,
            "curvature": pipeline.analysis.curvature if pipeline.analysis is not None else None,
            "vertex_x": pipeline.analysis.vertex_x if pipeline.analysis is not None else None,
        })
    _emit({"utility": [p.to_dict() for p in pipelines]}, records, fmt, out_dir, "fit")
    return EXIT_OK


@cli.command(name="ara")
@lab_options
@click.option("--coefficients", required=True, help="a2,a1,a0 of u(x) = a2 x^2 + a1 x + a0")
@click.option("--x", "xs", type=float, multiple=True, required=True, help="Evaluation point (repeatable)")
def ara_command(config_path, seed, reps, out_dir, fmt, coefficients, xs):
    """Arrow-Pratt absolute risk aversion of a quadratic utility."""
    try:
        values = [float(part) for part in coefficients.split(",")]
    except ValueError as e:
        raise ValidationError(f"coefficients must be three numbers a2,a1,a0, got {coefficients!r}") from e
    rows = PutInsuranceLab.risk_aversion(values, xs)
    if any(row["lambda"] == UNDEFINED_LAMBDA for row in rows):
        logger.warning("lambda is undefined at the stationary point of u")
    _emit({"coefficients": values, "points": rows}, rows, fmt, out_dir, "ara")
    return EXIT_OK


@cli.command()
@lab_options
@click.option("--tolerance", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option("--strict", is_flag=True, help="Exit 3 when any printed value is not reproduced")
def replicate(config_path, seed, reps, out_dir, fmt, tolerance, strict):
    """Audit the printed tables against recomputation."""
    lab = _lab(config_path, seed, reps)
    report = lab.replicate(tolerance)
    _emit(report.to_dict(), [entry.to_dict() for entry in report.entries], fmt, out_dir, "replication")

    inconsistent = sum(not check.consistent for check in report.consistency)
    if report.has_mismatch:
        click.echo(f"✗ {report.mismatch_count} mismatching cells, {inconsistent} inconsistent simulations", err=True)
    else:
        click.echo("✓ All printed values reproduced", err=True)
    if strict and report.has_mismatch:
        return EXIT_MISMATCH
    return EXIT_OK


@cli.command()
@lab_options
@click.option("--workers", type=int, default=None, help="Monte Carlo threads; never changes results")
def report(config_path, seed, reps, out_dir, fmt, workers):
    """Full pipeline: suite, utility fits, audit and output files."""
    lab = _lab(config_path, seed, reps, workers)
    result = lab.report()
    formats = (fmt,) if fmt is not None else None
    paths = lab.write(result, out_dir, formats)
    for diagnostic in result.diagnostics:
        click.echo(f"⚠️  {diagnostic}", err=True)
    click.echo(f"✓ Report written to {out_dir or lab.config.output_directory} ({len(paths)} files)", err=True)
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Runs one subcommand and maps failures to exit codes

    Returns:
        int: 0 success, 1 validation or usage error, 2 I/O error,
            3 mismatches under replicate --strict
    """
    try:
        result = cli.main(args=argv, prog_name="run_lab", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (ValidationError, ConfigParseError) as e:
        logger.error("%s", e)
        click.echo(f"✗ {e}", err=True)
        return EXIT_USAGE
    except OSError as e:
        logger.error("%s", e)
        click.echo(f"✗ {e}", err=True)
        return EXIT_IO
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(run_cli())
