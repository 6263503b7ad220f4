"""
Lab configuration, end-to-end report assembly and file emission

Config files are TOML (read with tomllib, written with tomli_w) or YAML with
the same structure. Reports serialize canonically so that identical runs
produce byte-identical files.
"""
import json
import logging
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import tomli_w
import yaml

from src.lab_errors import ConfigParseError, ValidationError
from src.market_core_functions import (
    PAPER_INSTANCES,
    PAPER_MARKET,
    PAPER_SCENARIOS,
    MarketParams,
    MoveInstance,
    ScenarioSpec,
    validate_instance,
    validate_market,
    validate_scenario,
)
from src.pricing_functions import DEFAULT_REPLICATIONS, MAX_SEED
from src.strategy_functions import (
    ANALYTIC,
    MONTE_CARLO,
    DiscrepancyReport,
    EquityTable,
    PriceSource,
    SuiteResult,
    dataset_instances,
    dataset_market,
    load_paper_dataset,
    printed_excess,
    replicate_paper,
    run_suite,
)
from src.utility_functions import (
    QuadraticUtility,
    UtilityAnalysis,
    UtilityIndexScheme,
    UtilityPoint,
    analyze_utility,
    assign_utility_indices,
    classify_risk_attitude,
    evaluate_utility,
    fit_quadratic,
    points_domain,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

PAPER_FIXED = "paper_fixed"
SOURCE_KINDS = (ANALYTIC, MONTE_CARLO, PAPER_FIXED)

AS_PRINTED = "as_printed"
RECOMPUTED = "recomputed"

FITTED = "fitted"
INSUFFICIENT_POINTS = "insufficient points"
FIT_FAILED = "fit_failed"

DEFAULT_OUTPUT_DIRECTORY = "putlab_output"
DEFAULT_FORMATS = ("json", "csv")
OUTPUT_FORMATS = ("json", "csv")
DEFAULT_FIGURE_STEP = 0.01

REPORT_DIGITS = 6

_SECTIONS = ("market", "scenario", "instance", "simulation", "utility", "pricing", "output")

ANALYTIC_DISPERSION_NOTE = (
    "Analytic put prices make the excess equity equal to (1 - exp(-r tau)) times the "
    "expected put payoff, so instances with the same payoff distribution share one "
    "excess equity. Distinct utility points in the original study come from Monte "
    "Carlo dispersion in the simulated put prices."
)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything one lab run needs.

    Attributes:
        market(MarketParams): contract economics
        scenarios(tuple): ScenarioSpec per probability space
        instances(tuple): MoveInstance per move instance
        source(str): 'analytic', 'monte_carlo' or 'paper_fixed'
        index_scheme(UtilityIndexScheme): one index per instance
        replications(int): Monte Carlo sample size
        seed(int): unsigned 64-bit Monte Carlo seed
        workers(int): Monte Carlo threads, never changes results
        output_directory(str): where write_outputs puts files
        formats(tuple): subset of ('json', 'csv')
    """
    market: MarketParams = PAPER_MARKET
    scenarios: Tuple[ScenarioSpec, ...] = PAPER_SCENARIOS
    instances: Tuple[MoveInstance, ...] = PAPER_INSTANCES
    source: str = PAPER_FIXED
    index_scheme: UtilityIndexScheme = field(default_factory=UtilityIndexScheme)
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    workers: int = 1
    output_directory: str = DEFAULT_OUTPUT_DIRECTORY
    formats: Tuple[str, ...] = DEFAULT_FORMATS

    def price_source(self, dataset: Optional[dict] = None) -> PriceSource:
        if self.source == ANALYTIC:
            return PriceSource.analytic()
        if self.source == MONTE_CARLO:
            return PriceSource.monte_carlo(self.replications, self.seed)
        return PriceSource.paper_fixed(dataset)

    def to_dict(self) -> dict:
        """Echo used in reports; workers and output location are left out."""
        return {
            "market": self.market.to_dict(),
            "scenarios": [scenario.to_dict() for scenario in self.scenarios],
            "instances": [instance.to_dict() for instance in self.instances],
            "source": self.source,
            "index_scheme": list(self.index_scheme.indices),
            "replications": self.replications,
            "seed": self.seed,
        }


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    validate_market(config.market)
    if not config.scenarios:
        raise ValidationError("config needs at least one scenario")
    if not config.instances:
        raise ValidationError("config needs at least one instance")
    for scenario in config.scenarios:
        validate_scenario(scenario)
    for instance in config.instances:
        validate_instance(instance, config.market)

    labels = [scenario.label for scenario in config.scenarios]
    if len(set(labels)) != len(labels):
        raise ValidationError(f"scenario names must be unique, got {labels}")
    ordinals = [instance.ordinal for instance in config.instances]
    if len(set(ordinals)) != len(ordinals):
        raise ValidationError(f"instance ordinals must be unique, got {ordinals}")

    if len(config.index_scheme) != len(config.instances):
        raise ValidationError(
            f"index scheme has {len(config.index_scheme)} entries for {len(config.instances)} instances"
        )
    if config.source not in SOURCE_KINDS:
        raise ValidationError(f"price source must be one of {SOURCE_KINDS}, got {config.source!r}")
    if config.replications < 1:
        raise ValidationError(f"replications must be >= 1, got {config.replications}")
    if not (0 <= config.seed <= MAX_SEED):
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {config.seed}")
    if config.workers < 1:
        raise ValidationError(f"workers must be >= 1, got {config.workers}")
    unknown = [f for f in config.formats if f not in OUTPUT_FORMATS]
    if unknown:
        raise ValidationError(f"unknown output formats {unknown}")
    return config


def _read_raw(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigParseError(f"cannot decode {path}: {e}") from e
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigParseError(f"cannot parse {path}: {getattr(e, 'problem', e)}", line=line) from e
    else:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigParseError(f"cannot parse {path}: {e}", line=getattr(e, "lineno", None)) from e

    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{path} must hold a table of sections")
    return raw


def _table(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigParseError("expected a table", field=name)
    return value


def _entries(raw: dict, name: str) -> Optional[list]:
    if name not in raw:
        return None
    value = raw[name]
    if not isinstance(value, list) or not all(isinstance(item, dict) for item in value):
        raise ConfigParseError("expected an array of tables", field=name)
    return value


def _number(table: dict, key: str, path: str, default=None, integer: bool = False):
    if key not in table:
        if default is None:
            raise ConfigParseError("required value is missing", field=path)
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParseError(f"expected a number, got {value!r}", field=path)
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigParseError(f"expected an integer, got {value!r}", field=path)
        return int(value)
    return float(value)


def _build_config(raw: dict) -> ExperimentConfig:
    unknown = [key for key in raw if key not in _SECTIONS]
    if unknown:
        raise ConfigParseError(f"unknown sections {unknown}", field=unknown[0])

    market_table = _table(raw, "market")
    market = MarketParams(
        spot=_number(market_table, "spot", "market.spot", PAPER_MARKET.spot),
        strike=_number(market_table, "strike", "market.strike", PAPER_MARKET.strike),
        rate=_number(market_table, "rate", "market.rate", PAPER_MARKET.rate),
        horizon=_number(market_table, "horizon", "market.horizon", PAPER_MARKET.horizon),
    )

    scenario_entries = _entries(raw, "scenario")
    if scenario_entries is None:
        scenarios = PAPER_SCENARIOS
    else:
        scenarios = []
        for position, entry in enumerate(scenario_entries):
            path = f"scenario[{position}]"
            if not isinstance(entry.get("name"), str):
                raise ConfigParseError("scenario name must be a string", field=f"{path}.name")
            scenarios.append(ScenarioSpec(
                label=entry["name"],
                p_up=_number(entry, "p_up", f"{path}.p_up"),
                p_neutral=_number(entry, "p_neutral", f"{path}.p_neutral"),
                p_down=_number(entry, "p_down", f"{path}.p_down"),
            ))
        scenarios = tuple(scenarios)

    instance_entries = _entries(raw, "instance")
    if instance_entries is None:
        instances = PAPER_INSTANCES
    else:
        instances = tuple(
            MoveInstance(
                up_move=_number(entry, "up_move", f"instance[{position}].up_move"),
                down_move=_number(entry, "down_move", f"instance[{position}].down_move"),
                ordinal=_number(entry, "ordinal", f"instance[{position}].ordinal", position + 1, integer=True),
            )
            for position, entry in enumerate(instance_entries)
        )

    utility_table = _table(raw, "utility")
    if "indices" in utility_table:
        indices = utility_table["indices"]
        if not isinstance(indices, list):
            raise ConfigParseError("expected an array of numbers", field="utility.indices")
        scheme = UtilityIndexScheme(tuple(
            _number({"index": value}, "index", f"utility.indices[{k}]") for k, value in enumerate(indices)
        ))
    else:
        scheme = UtilityIndexScheme.equally_spaced(len(instances))

    simulation = _table(raw, "simulation")
    pricing = _table(raw, "pricing")
    source = pricing.get("source", PAPER_FIXED)
    if not isinstance(source, str):
        raise ConfigParseError("expected a string", field="pricing.source")

    output = _table(raw, "output")
    directory = output.get("directory", DEFAULT_OUTPUT_DIRECTORY)
    formats = output.get("formats", list(DEFAULT_FORMATS))
    if not isinstance(directory, str):
        raise ConfigParseError("expected a string", field="output.directory")
    if not isinstance(formats, list) or not all(isinstance(f, str) for f in formats):
        raise ConfigParseError("expected an array of strings", field="output.formats")

    return ExperimentConfig(
        market=market,
        scenarios=scenarios,
        instances=instances,
        source=source,
        index_scheme=scheme,
        replications=_number(simulation, "replications", "simulation.replications",
                             DEFAULT_REPLICATIONS, integer=True),
        seed=_number(simulation, "seed", "simulation.seed", 0, integer=True),
        workers=_number(simulation, "workers", "simulation.workers", 1, integer=True),
        output_directory=directory,
        formats=tuple(formats),
    )


def load_config(path) -> ExperimentConfig:
    """
    Reads and validates a lab config; omitted fields take the printed-study defaults

    Parameters:
        path(str|Path):
            .toml file, or .yaml/.yml with the same structure

    Returns:
        config(ExperimentConfig):
            fully validated configuration

    Raises:
        FileNotFoundError: the file does not exist
        ConfigParseError: syntax error or malformed field, with line/field diagnostics
        ValidationError: a value violates a model invariant
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    config = validate_config(_build_config(_read_raw(path)))
    logger.info("loaded config %s: %d scenarios x %d instances, source %s",
                path, len(config.scenarios), len(config.instances), config.source)
    return config


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "market": config.market.to_dict(),
        "scenario": [scenario.to_dict() for scenario in config.scenarios],
        "instance": [instance.to_dict() for instance in config.instances],
        "simulation": {
            "replications": config.replications,
            "seed": config.seed,
            "workers": config.workers,
        },
        "utility": {"indices": list(config.index_scheme.indices)},
        "pricing": {"source": config.source},
        "output": {
            "directory": config.output_directory,
            "formats": list(config.formats),
        },
    }


def write_config(config: ExperimentConfig, path) -> Path:
    """Writes a config that load_config reads back unchanged."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config_to_dict(config)
    if path.suffix.lower() in (".yaml", ".yml"):
        path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
    else:
        path.write_text(tomli_w.dumps(data), encoding="utf-8")
    return path


@dataclass(frozen=True)
class FigureSeries:
    fitted: pd.DataFrame
    observed: pd.DataFrame


def figure_series(q: QuadraticUtility, points: Sequence[UtilityPoint], step: float = DEFAULT_FIGURE_STEP) -> FigureSeries:
    """
    Samples the fitted curve over [min x, max x] with an inclusive endpoint

    Returns:
        series(FigureSeries):
            fitted: columns x, u_fitted
            observed: columns x, u_observed (the raw points, sorted by x)
    """
    if not points:
        raise ValidationError("figure series needs at least one point")
    if not step > 0:
        raise ValidationError(f"step must be > 0, got {step}")

    lower, upper = points_domain(points)
    n_steps = math.floor((upper - lower) / step + 1e-9)
    xs = lower + step * np.arange(n_steps + 1)
    if upper - xs[-1] > 1e-9 * max(1.0, abs(upper)):
        xs = np.append(xs, upper)
    else:
        xs[-1] = upper

    fitted = pd.DataFrame({
        "x": xs,
        "u_fitted": [evaluate_utility(q, float(x))[0] for x in xs],
    })
    observed = pd.DataFrame(
        sorted((p.x, p.u) for p in points),
        columns=["x", "u_observed"],
    )
    return FigureSeries(fitted, observed)


@dataclass(frozen=True)
class UtilityPipeline:
    """
    Utility derivation for one scenario from one set of excess equities.

    Attributes:
        scenario(str): scenario label
        pipeline(str): 'as_printed', 'recomputed', 'analytic' or 'monte_carlo'
        excess(tuple): excess equity per instance, instance order
        status(str): 'fitted', 'insufficient points' or 'fit_failed'
        points(tuple): UtilityPoint per instance
        fit(QuadraticUtility|None)
        analysis(UtilityAnalysis|None)
        diagnostic(str|None): why no fit was produced
    """
    scenario: str
    pipeline: str
    excess: Tuple[float, ...]
    status: str
    points: Tuple[UtilityPoint, ...] = ()
    fit: Optional[QuadraticUtility] = None
    analysis: Optional[UtilityAnalysis] = None
    diagnostic: Optional[str] = None

    def attitudes(self) -> List[dict]:
        if self.fit is None:
            return []
        return [{"x": p.x, "attitude": classify_risk_attitude(self.fit, p.x)} for p in self.points]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "pipeline": self.pipeline,
            "status": self.status,
            "excess_equity": list(self.excess),
            "points": [{"x": p.x, "u": p.u} for p in self.points],
            "coefficients": self.fit.to_dict() if self.fit is not None else None,
            "analysis": self.analysis.to_dict() if self.analysis is not None else None,
            "attitude_at_points": self.attitudes(),
            "diagnostic": self.diagnostic,
        }


def derive_utility(scenario: str,
                   pipeline: str,
                   excess: Sequence[float],
                   scheme: UtilityIndexScheme) -> UtilityPipeline:
    """
    Ranks, fits and analyses one scenario; a failed fit becomes a diagnostic
    """
    excess = tuple(float(x) for x in excess)
    if len(excess) < 3:
        return UtilityPipeline(scenario, pipeline, excess, INSUFFICIENT_POINTS,
                               diagnostic=f"a quadratic needs 3 instances, got {len(excess)}")

    points = tuple(assign_utility_indices(excess, scheme))
    try:
        q = fit_quadratic(points)
    except ValidationError as e:
        logger.warning("no utility fit for scenario %s (%s): %s", scenario, pipeline, e)
        return UtilityPipeline(scenario, pipeline, excess, FIT_FAILED, points, diagnostic=str(e))

    analysis = analyze_utility(q, points_domain(points))
    return UtilityPipeline(scenario, pipeline, excess, FITTED, points, q, analysis)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    suite: SuiteResult
    utility: Tuple[UtilityPipeline, ...]
    discrepancies: Optional[DiscrepancyReport] = None
    diagnostics: Tuple[str, ...] = ()
    notes: Tuple[str, ...] = ()
    dataset_version: Optional[str] = None

    def to_dict(self) -> dict:
        cells = []
        for cell in self.suite.cells:
            cells.append({
                "scenario": cell.scenario.label,
                "instance": cell.instance.ordinal,
                "up_move": cell.instance.up_move,
                "down_move": cell.instance.down_move,
                "put_price": cell.put_price,
                "price_source": cell.comparison.price_source,
                "oracle": cell.oracle.to_dict(),
                "estimate": cell.estimate.to_dict() if cell.estimate is not None else None,
                "a1": cell.a1.to_dict(),
                "a2": cell.a2.to_dict(),
                "comparison": cell.comparison.to_dict(),
            })

        discrepancies = []
        replication = None
        if self.discrepancies is not None:
            discrepancies = [entry.to_dict() for entry in self.discrepancies.entries]
            replication = {
                "tolerance": self.discrepancies.tolerance,
                "mismatch_count": self.discrepancies.mismatch_count,
                "consistency": [check.to_dict() for check in self.discrepancies.consistency],
                "range_checks": [check.to_dict() for check in self.discrepancies.range_checks],
            }

        return {
            "schema": SCHEMA_VERSION,
            "dataset_version": self.dataset_version,
            "config": self.config.to_dict(),
            "market": self.config.market.to_dict(),
            "cells": cells,
            "utility": [pipeline.to_dict() for pipeline in self.utility],
            "discrepancies": discrepancies,
            "replication": replication,
            "diagnostics": list(self.diagnostics),
            "notes": list(self.notes),
        }


def _paper_cells_match(config: ExperimentConfig, dataset: dict) -> bool:
    paper_instances = {(i.up_move, i.down_move, i.ordinal) for i in dataset_instances(dataset)}
    return all((i.up_move, i.down_move, i.ordinal) in paper_instances for i in config.instances)


def run_report(config: ExperimentConfig, dataset: Optional[dict] = None) -> ExperimentReport:
    """
    Suite, utility derivation per scenario and, for printed prices, the table audit

    Parameters:
        config(ExperimentConfig):
            validated configuration
        dataset(dict):
            printed-values dataset; loaded from the package when omitted and
            the source is paper_fixed

    Returns:
        report(ExperimentReport):
            complete report; nothing is written here
    """
    validate_config(config)
    if config.source == PAPER_FIXED and dataset is None:
        dataset = load_paper_dataset()

    if config.source == PAPER_FIXED and config.market != dataset_market(dataset):
        logger.warning("printed put prices are used with market parameters other than the printed study %s",
                       config.market.to_dict())

    source = config.price_source(dataset)
    suite = run_suite(config.market, config.scenarios, config.instances, source, workers=config.workers)
    excess_by_scenario = suite.excess_by_scenario()

    pipelines: List[UtilityPipeline] = []
    diagnostics: List[str] = []
    notes: List[str] = []

    paper_points = config.source == PAPER_FIXED and _paper_cells_match(config, dataset)
    printed_labels = {entry["scenario"] for entry in dataset["a2_tables"]} if dataset is not None else set()

    for scenario in config.scenarios:
        excess = excess_by_scenario[scenario.label]
        if config.source == PAPER_FIXED:
            if paper_points and scenario.label in printed_labels:
                printed = printed_excess(dataset, scenario.label)
                by_ordinal = dict(zip((i.ordinal for i in dataset_instances(dataset)), printed))
                as_printed = [by_ordinal[i.ordinal] for i in config.instances]
                pipelines.append(derive_utility(scenario.label, AS_PRINTED, as_printed, config.index_scheme))
            pipelines.append(derive_utility(scenario.label, RECOMPUTED, excess, config.index_scheme))
        else:
            pipelines.append(derive_utility(scenario.label, config.source, excess, config.index_scheme))

    for pipeline in pipelines:
        if pipeline.status != FITTED:
            diagnostics.append(f"{pipeline.scenario}/{pipeline.pipeline}: {pipeline.status}: {pipeline.diagnostic}")

    if config.source == ANALYTIC:
        notes.append(ANALYTIC_DISPERSION_NOTE)

    discrepancies = None
    dataset_version = None
    if config.source == PAPER_FIXED:
        discrepancies = replicate_paper(dataset=dataset)
        dataset_version = str(dataset["dataset_version"])

    logger.info("report built: %d cells, %d utility pipelines, %d diagnostics",
                len(suite.cells), len(pipelines), len(diagnostics))
    return ExperimentReport(
        config=config,
        suite=suite,
        utility=tuple(pipelines),
        discrepancies=discrepancies,
        diagnostics=tuple(diagnostics),
        notes=tuple(notes),
        dataset_version=dataset_version,
    )


def _canonical(value):
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return round(value, REPORT_DIGITS) + 0.0
    if isinstance(value, dict):
        return {str(key): _canonical(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    if isinstance(value, np.generic):
        return _canonical(value.item())
    return value


def report_to_json(report) -> str:
    """
    Canonical JSON: sorted keys, 2-space indent, floats rounded to 6 fractional
    digits and written in their shortest form (0.51, not 0.510000)
    """
    data = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(_canonical(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def table_frame(table: EquityTable) -> pd.DataFrame:
    """Equity table as presentation strings, currency to the cent, with a TOTAL row."""
    rows = [
        {
            "move": row.move_label,
            "probability": f"{row.probability:g}",
            "net_change": f"{row.net_change:.2f}",
            "contribution": f"{row.contribution:.2f}",
        }
        for row in table.rows
    ]
    rows.append({"move": "TOTAL", "probability": "", "net_change": "", "contribution": f"{table.total:.2f}"})
    return pd.DataFrame(rows, columns=["move", "probability", "net_change", "contribution"])


def write_outputs(report: ExperimentReport,
                  directory=None,
                  formats: Optional[Sequence[str]] = None,
                  step: float = DEFAULT_FIGURE_STEP) -> List[Path]:
    """
    Writes report.json, the equity-table CSVs and the figure series CSVs

    Returns:
        paths(List[Path]): every file written, in write order
    """
    directory = Path(directory if directory is not None else report.config.output_directory)
    formats = tuple(formats if formats is not None else report.config.formats)
    unknown = [f for f in formats if f not in OUTPUT_FORMATS]
    if unknown:
        raise ValidationError(f"unknown output formats {unknown}")

    directory.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    if "json" in formats:
        path = directory / "report.json"
        path.write_text(report_to_json(report), encoding="utf-8")
        written.append(path)

    if "csv" in formats:
        tables_dir = directory / "tables"
        tables_dir.mkdir(exist_ok=True)
        for cell in report.suite.cells:
            for table in (cell.a1, cell.a2):
                path = tables_dir / f"{table.scenario}_{table.instance}_{table.strategy}.csv"
                table_frame(table).to_csv(path, index=False, lineterminator="\n")
                written.append(path)

        figures_dir = directory / "figures"
        figures_dir.mkdir(exist_ok=True)
        for pipeline in report.utility:
            if pipeline.fit is None:
                continue
            series = figure_series(pipeline.fit, pipeline.points, step)
            stem = f"{pipeline.scenario}_{pipeline.pipeline}"
            fitted_path = figures_dir / f"{stem}_fitted.csv"
            observed_path = figures_dir / f"{stem}_observed.csv"
            series.fitted.to_csv(fitted_path, index=False, float_format="%.6f", lineterminator="\n")
            series.observed.to_csv(observed_path, index=False, float_format="%.6f", lineterminator="\n")
            written.extend([fitted_path, observed_path])

    logger.info("wrote %d files to %s", len(written), directory)
    return written


def override_config(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """dataclasses.replace that skips None values and revalidates."""
    changes = {key: value for key, value in changes.items() if value is not None}
    return validate_config(replace(config, **changes)) if changes else config


def excess_summary(report: ExperimentReport) -> Dict[str, float]:
    """Flat excess-equity metrics, one per cell, for experiment tracking."""
    return {
        f"excess_{cell.scenario.label}_{cell.instance.ordinal}": cell.comparison.excess_equity
        for cell in report.suite.cells
    }
