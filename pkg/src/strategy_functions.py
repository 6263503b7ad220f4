"""
Expected change in equity for strategy A1 (long underlying) and A2 (long
underlying + long put), excess equity of A2 over A1, the scenario x instance
suite, and the audit of the printed tables against recomputation.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.lab_errors import DatasetError, ValidationError
from src.market_core_functions import (
    MOVE_LABELS,
    MarketParams,
    MoveInstance,
    ScenarioSpec,
    terminal_distribution,
    validate_instance,
    validate_market,
    validate_scenario,
)
from src.payoff_theory_functions import PUT, vanilla_payoff
from src.pricing_functions import (
    DEFAULT_REPLICATIONS,
    OracleValues,
    SimulationEstimate,
    analytic_values,
    cell_seed,
    consistency_band,
    mc_estimate,
)
from src.utility_functions import (
    QuadraticUtility,
    UtilityIndexScheme,
    UtilityPoint,
    analyze_utility,
    assign_utility_indices,
    classify_risk_attitude,
    curvature_of,
    fit_quadratic,
)

logger = logging.getLogger(__name__)

A1 = "A1"
A2 = "A2"

ANALYTIC = "analytic"
MONTE_CARLO = "monte_carlo"
FIXED = "fixed"

MATCH = "match"
MISMATCH = "mismatch"

# printed tables are rounded to the cent
DEFAULT_TOLERANCE = 0.01

DATASET_PATH = Path(__file__).resolve().parent.parent / "datasets" / "paper_tables.json"

_DATASET_KEYS = (
    "dataset_version", "market", "replications", "index_scheme", "scenarios",
    "instances", "a1_tables", "simulations", "a2_tables", "fits",
)


@dataclass(frozen=True)
class EquityRow:
    move_label: str
    probability: float
    net_change: float
    contribution: float


@dataclass(frozen=True)
class EquityTable:
    """
    Expected change in equity of one strategy in one (scenario, instance) cell.

    Attributes:
        rows(tuple): EquityRow per move, ordered up, neutral, down
        total(float): sum of the contributions
        strategy(str): 'A1' or 'A2'
        put_price_used(float|None): premium paid for the put (A2 only)
        scenario(str): scenario label
        instance(int): instance ordinal
    """
    rows: Tuple[EquityRow, ...]
    total: float
    strategy: str
    put_price_used: Optional[float]
    scenario: str
    instance: int

    @property
    def nets(self) -> np.ndarray:
        return np.array([row.net_change for row in self.rows])

    def row(self, move_label: str) -> EquityRow:
        return self.rows[MOVE_LABELS.index(move_label)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.move_label, r.probability, r.net_change, r.contribution) for r in self.rows],
            columns=["move", "probability", "net_change", "contribution"],
        )

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "scenario": self.scenario,
            "instance": self.instance,
            "put_price_used": self.put_price_used,
            "rows": [
                {
                    "move": r.move_label,
                    "probability": r.probability,
                    "net_change": r.net_change,
                    "contribution": r.contribution,
                }
                for r in self.rows
            ],
            "total": self.total,
        }


@dataclass(frozen=True)
class StrategyComparison:
    a1_total: float
    a2_total: float
    excess_equity: float
    scenario: str
    instance: int
    price_source: str

    def to_dict(self) -> dict:
        return {
            "a1_total": self.a1_total,
            "a2_total": self.a2_total,
            "excess_equity": self.excess_equity,
            "scenario": self.scenario,
            "instance": self.instance,
            "price_source": self.price_source,
        }


@dataclass(frozen=True)
class PriceSource:
    """
    Where the put premium of an A2 table comes from.

    Attributes:
        kind(str): 'analytic', 'monte_carlo' or 'fixed'
        replications(int): Monte Carlo sample size
        seed(int): Monte Carlo seed
        value(float|None): a single fixed premium for every cell
        cell_prices(tuple): ((label, up_move, down_move), premium) pairs for
            per-cell fixed premiums such as the printed simulated prices
        label(str): short provenance name used in descriptors
    """
    kind: str
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    value: Optional[float] = None
    cell_prices: Tuple[Tuple[Tuple[str, float, float], float], ...] = ()
    label: str = ""

    def __post_init__(self):
        if self.kind not in (ANALYTIC, MONTE_CARLO, FIXED):
            raise ValidationError(f"unknown price source kind {self.kind!r}")
        if self.replications < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")
        if self.kind == FIXED:
            if self.value is None and not self.cell_prices:
                raise ValidationError("a fixed price source needs a value or per-cell prices")
            prices = [self.value] if self.value is not None else []
            prices += [price for _, price in self.cell_prices]
            for price in prices:
                if price < 0:
                    raise ValidationError(f"fixed put price must be >= 0, got {price}")

    @classmethod
    def analytic(cls) -> "PriceSource":
        return cls(kind=ANALYTIC)

    @classmethod
    def monte_carlo(cls, replications: int = DEFAULT_REPLICATIONS, seed: int = 0) -> "PriceSource":
        return cls(kind=MONTE_CARLO, replications=replications, seed=seed)

    @classmethod
    def fixed(cls, value: float) -> "PriceSource":
        return cls(kind=FIXED, value=float(value))

    @classmethod
    def paper_fixed(cls, dataset: Optional[dict] = None) -> "PriceSource":
        """Fixed source holding the printed simulated put price of every printed cell."""
        dataset = dataset if dataset is not None else load_paper_dataset()
        instances = {entry["ordinal"]: entry for entry in dataset["instances"]}
        cells = []
        for entry in dataset["simulations"]:
            instance = instances[entry["instance"]]
            key = (entry["scenario"], float(instance["up_move"]), float(instance["down_move"]))
            cells.append((key, float(entry["put_price"])))
        return cls(kind=FIXED, cell_prices=tuple(cells), label="paper")

    def price_for(self, scenario: ScenarioSpec, instance: MoveInstance) -> float:
        if self.value is not None:
            return self.value
        key = (scenario.label, float(instance.up_move), float(instance.down_move))
        for cell_key, price in self.cell_prices:
            if cell_key == key:
                return price
        raise ValidationError(
            f"no fixed put price for scenario '{scenario.label}' with moves "
            f"+{instance.up_move}/-{instance.down_move}; set pricing.source to "
            f"'analytic' or 'monte_carlo' for cells outside the printed study"
        )

    def describe(self) -> str:
        if self.kind == ANALYTIC:
            return ANALYTIC
        if self.kind == MONTE_CARLO:
            return f"monte_carlo(replications={self.replications}, seed={self.seed})"
        if self.value is not None:
            return f"fixed({self.value})"
        return f"fixed({self.label or 'per-cell'})"


@dataclass(frozen=True)
class CellResult:
    scenario: ScenarioSpec
    instance: MoveInstance
    put_price: float
    oracle: OracleValues
    estimate: Optional[SimulationEstimate]
    a1: EquityTable
    a2: EquityTable
    comparison: StrategyComparison


@dataclass(frozen=True)
class SuiteResult:
    """One CellResult per (scenario, instance), scenario-major."""
    cells: Tuple[CellResult, ...]
    source: PriceSource

    def excess_by_scenario(self) -> Dict[str, List[float]]:
        grouped: Dict[str, List[float]] = {}
        for cell in self.cells:
            grouped.setdefault(cell.scenario.label, []).append(cell.comparison.excess_equity)
        return grouped

    def to_frame(self) -> pd.DataFrame:
        records = []
        for cell in self.cells:
            records.append({
                "scenario": cell.scenario.label,
                "instance": cell.instance.ordinal,
                "put_price": cell.put_price,
                "oracle_put_price": cell.oracle.put_price,
                "a1_total": cell.comparison.a1_total,
                "a2_total": cell.comparison.a2_total,
                "excess_equity": cell.comparison.excess_equity,
            })
        return pd.DataFrame(records)


@dataclass(frozen=True)
class DiscrepancyEntry:
    table: str
    cell: str
    printed: float
    recomputed: float
    difference: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "cell": self.cell,
            "printed": self.printed,
            "recomputed": self.recomputed,
            "difference": self.difference,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class ConsistencyCheck:
    """Printed simulated value against the exact value with a 3-standard-error band."""
    table: str
    quantity: str
    printed: float
    exact: float
    band: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "quantity": self.quantity,
            "printed": self.printed,
            "exact": self.exact,
            "band": self.band,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class RangeCheck:
    """Printed qualitative statement of a fitted case against the algebra."""
    case: str
    scenario: str
    check: str
    printed: str
    recomputed: str
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "scenario": self.scenario,
            "check": self.check,
            "printed": self.printed,
            "recomputed": self.recomputed,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class DiscrepancyReport:
    entries: List[DiscrepancyEntry]
    tolerance: float
    consistency: List[ConsistencyCheck] = field(default_factory=list)
    range_checks: List[RangeCheck] = field(default_factory=list)
    dataset_version: str = ""

    @property
    def mismatches(self) -> List[DiscrepancyEntry]:
        return [entry for entry in self.entries if entry.verdict == MISMATCH]

    @property
    def mismatch_count(self) -> int:
        return len(self.mismatches)

    @property
    def has_mismatch(self) -> bool:
        return self.mismatch_count > 0 or not all(check.consistent for check in self.consistency)

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "dataset_version": self.dataset_version,
            "mismatch_count": self.mismatch_count,
            "entries": [entry.to_dict() for entry in self.entries],
            "consistency": [check.to_dict() for check in self.consistency],
            "range_checks": [check.to_dict() for check in self.range_checks],
        }


def load_paper_dataset(path: Optional[Path] = None) -> dict:
    """
    Loads the printed-values dataset

    Raises:
        DatasetError: the file is missing, not JSON, or lacks a required section
    """
    path = Path(path) if path is not None else DATASET_PATH
    try:
        with open(path, "r", encoding="utf-8") as f:
            dataset = json.load(f)
    except FileNotFoundError as e:
        raise DatasetError(f"printed-values dataset not found at {path}") from e
    except json.JSONDecodeError as e:
        raise DatasetError(f"printed-values dataset at {path} is corrupt: {e}") from e

    if not isinstance(dataset, dict):
        raise DatasetError(f"printed-values dataset at {path} must be a JSON object")
    missing = [key for key in _DATASET_KEYS if key not in dataset]
    if missing:
        raise DatasetError(f"printed-values dataset at {path} is missing sections {missing}")
    return dataset


def dataset_market(dataset: dict) -> MarketParams:
    return validate_market(MarketParams(**dataset["market"]))


def dataset_scenarios(dataset: dict) -> List[ScenarioSpec]:
    return [
        validate_scenario(ScenarioSpec(e["name"], e["p_up"], e["p_neutral"], e["p_down"]))
        for e in dataset["scenarios"]
    ]


def dataset_instances(dataset: dict) -> List[MoveInstance]:
    return [MoveInstance(e["up_move"], e["down_move"], e["ordinal"]) for e in dataset["instances"]]


def printed_excess(dataset: dict, scenario_label: str) -> List[float]:
    """Printed expected excess equities of one scenario in instance order."""
    entries = sorted(
        (e for e in dataset["a2_tables"] if e["scenario"] == scenario_label),
        key=lambda e: e["instance"],
    )
    return [float(e["excess_equity"]) for e in entries]


def equity_table_a1(scenario: ScenarioSpec, instance: MoveInstance) -> EquityTable:
    """
    Strategy A1, long the underlying only: nets (+up_move, 0, -down_move)
    """
    validate_scenario(scenario)
    validate_instance(instance)

    nets = (instance.up_move, 0.0, -instance.down_move)
    return _build_table(A1, scenario, instance, nets, None)


def equity_table_a2(params: MarketParams,
                    scenario: ScenarioSpec,
                    instance: MoveInstance,
                    put_price: float) -> EquityTable:
    """
    Strategy A2, protective put: per-move net = A1 net + max(X - S_T, 0) - put_price
    """
    if put_price < 0:
        raise ValidationError(f"put price must be >= 0, got {put_price}")

    distribution = terminal_distribution(params, scenario, instance)
    a1_nets = (instance.up_move, 0.0, -instance.down_move)
    nets = tuple(
        a1_net + vanilla_payoff(PUT, outcome.terminal_price, params.strike) - put_price
        for a1_net, outcome in zip(a1_nets, distribution.outcomes)
    )
    return _build_table(A2, scenario, instance, nets, float(put_price))


def _build_table(strategy: str,
                 scenario: ScenarioSpec,
                 instance: MoveInstance,
                 nets: Sequence[float],
                 put_price: Optional[float]) -> EquityTable:
    rows = tuple(
        EquityRow(label, probability, float(net), probability * float(net))
        for label, probability, net in zip(MOVE_LABELS, scenario.probabilities, nets)
    )
    total = float(sum(row.contribution for row in rows))
    return EquityTable(rows, total, strategy, put_price, scenario.label, instance.ordinal)


def compare_strategies(a1: EquityTable, a2: EquityTable, price_source: str = "") -> StrategyComparison:
    """
    Excess equity of the protective put over the plain long position
    """
    if a1.strategy != A1 or a2.strategy != A2:
        raise ValidationError(f"expected an A1 and an A2 table, got {a1.strategy} and {a2.strategy}")
    if (a1.scenario, a1.instance) != (a2.scenario, a2.instance):
        raise ValidationError(
            f"tables belong to different cells: {a1.scenario}/{a1.instance} vs {a2.scenario}/{a2.instance}"
        )
    if not price_source and a2.put_price_used is not None:
        price_source = f"fixed({a2.put_price_used})"
    return StrategyComparison(
        a1_total=a1.total,
        a2_total=a2.total,
        excess_equity=a2.total - a1.total,
        scenario=a1.scenario,
        instance=a1.instance,
        price_source=price_source,
    )


def run_suite(params: MarketParams,
              scenarios: Sequence[ScenarioSpec],
              instances: Sequence[MoveInstance],
              source: PriceSource,
              workers: int = 1) -> SuiteResult:
    """
    Builds A1, A2 and their comparison for every (scenario, instance) cell

    Cells are evaluated scenario-major, instance-minor. Monte Carlo cells use
    independent streams derived from (seed, scenario index, instance index).
    """
    if not scenarios:
        raise ValidationError("run_suite needs at least one scenario")
    if not instances:
        raise ValidationError("run_suite needs at least one instance")
    validate_market(params)

    descriptor = source.describe()
    cells = []
    for scenario_index, scenario in enumerate(scenarios):
        validate_scenario(scenario)
        for instance_index, instance in enumerate(instances):
            validate_instance(instance, params)
            oracle = analytic_values(params, scenario, instance)
            estimate = None

            if source.kind == ANALYTIC:
                put_price = oracle.put_price
            elif source.kind == MONTE_CARLO:
                estimate = mc_estimate(
                    params, scenario, instance,
                    replications=source.replications,
                    seed=cell_seed(source.seed, scenario_index, instance_index),
                    workers=workers,
                )
                put_price = estimate.put_price_mean
            else:
                put_price = source.price_for(scenario, instance)

            a1 = equity_table_a1(scenario, instance)
            a2 = equity_table_a2(params, scenario, instance, put_price)
            comparison = compare_strategies(a1, a2, descriptor)
            cells.append(CellResult(scenario, instance, put_price, oracle, estimate, a1, a2, comparison))

    logger.info("run_suite evaluated %d cells with %s", len(cells), descriptor)
    return SuiteResult(tuple(cells), source)


def _entry(table: str, cell: str, printed: float, recomputed: float, tolerance: float) -> DiscrepancyEntry:
    difference = abs(float(printed) - float(recomputed))
    verdict = MATCH if difference <= tolerance else MISMATCH
    return DiscrepancyEntry(table, cell, float(printed), float(recomputed), difference, verdict)


def _cell_lookup(dataset: dict):
    scenarios = {s.label: s for s in dataset_scenarios(dataset)}
    instances = {i.ordinal: i for i in dataset_instances(dataset)}
    return scenarios, instances


def as_printed_points(dataset: dict, scenario_label: str) -> List[UtilityPoint]:
    """(printed excess equity, printed utility index) pairs of one scenario."""
    entries = sorted(
        (e for e in dataset["a2_tables"] if e["scenario"] == scenario_label),
        key=lambda e: e["instance"],
    )
    return [UtilityPoint(float(e["excess_equity"]), float(e["utility_index"])) for e in entries]


def _printed_range_side(q: QuadraticUtility, boundary: float, lambda_sign: str) -> str:
    """Side of the boundary on which lambda really has the printed sign."""
    attitude = {"positive": "risk_averse", "negative": "risk_loving"}[lambda_sign]
    below = classify_risk_attitude(q, boundary - 0.1) == attitude
    above = classify_risk_attitude(q, boundary + 0.1) == attitude
    if below and above:
        return "both"
    if below:
        return "below"
    if above:
        return "above"
    return "neither"


def replicate_paper(tolerance: float = DEFAULT_TOLERANCE, dataset: Optional[dict] = None) -> DiscrepancyReport:
    """
    Recomputes every derivable printed value and reports match/mismatch

    Covers A1 contributions and totals, A2 nets, contributions, totals and
    excess equities from the printed put prices, the utility indices implied by
    the recomputed excess equities, the fitted coefficients and vertices of the
    printed points, the statistical consistency of the printed simulations, and
    the printed curvature / defining-range statements.
    """
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    dataset = dataset if dataset is not None else load_paper_dataset()
    params = dataset_market(dataset)
    scenarios, instances = _cell_lookup(dataset)
    simulations = {e["table"]: e for e in dataset["simulations"]}
    replications = int(dataset["replications"])

    entries: List[DiscrepancyEntry] = []

    for printed in dataset["a1_tables"]:
        table = f"Table {printed['table']}"
        recomputed = equity_table_a1(scenarios[printed["scenario"]], instances[printed["instance"]])
        for move in MOVE_LABELS:
            entries.append(_entry(table, f"{move}.contribution", printed["contributions"][move],
                                  recomputed.row(move).contribution, tolerance))
        entries.append(_entry(table, "total", printed["total"], recomputed.total, tolerance))

    recomputed_excess: Dict[str, Dict[int, float]] = {}
    for printed in dataset["a2_tables"]:
        table = f"Table {printed['table']}"
        scenario = scenarios[printed["scenario"]]
        instance = instances[printed["instance"]]
        put_price = float(simulations[printed["price_table"]]["put_price"])

        a1 = equity_table_a1(scenario, instance)
        a2 = equity_table_a2(params, scenario, instance, put_price)
        comparison = compare_strategies(a1, a2, f"fixed({put_price})")
        recomputed_excess.setdefault(scenario.label, {})[instance.ordinal] = comparison.excess_equity

        for move in MOVE_LABELS:
            entries.append(_entry(table, f"{move}.net_change", printed["nets"][move],
                                  a2.row(move).net_change, tolerance))
            entries.append(_entry(table, f"{move}.contribution", printed["contributions"][move],
                                  a2.row(move).contribution, tolerance))
        entries.append(_entry(table, "total", printed["total"], a2.total, tolerance))
        entries.append(_entry(table, "excess_equity", printed["excess_equity"],
                              comparison.excess_equity, tolerance))

    scheme = UtilityIndexScheme(tuple(dataset["index_scheme"]))
    for label, by_instance in recomputed_excess.items():
        ordinals = sorted(by_instance)
        points = assign_utility_indices([by_instance[o] for o in ordinals], scheme)
        for ordinal, point in zip(ordinals, points):
            printed = next(e for e in dataset["a2_tables"]
                           if e["scenario"] == label and e["instance"] == ordinal)
            entries.append(_entry(f"Table {printed['table']}", "utility_index",
                                  printed["utility_index"], point.u, tolerance))

    range_checks: List[RangeCheck] = []
    for printed in dataset["fits"]:
        case = f"Case {printed['case']}"
        fitted = fit_quadratic(as_printed_points(dataset, printed["scenario"]))
        for name in ("a2", "a1", "a0"):
            entries.append(_entry(case, name, printed["coefficients"][name], getattr(fitted, name), tolerance))
        analysis = analyze_utility(fitted, (0.0, 1.0))
        entries.append(_entry(case, "vertex", printed["boundary"], analysis.vertex_x, tolerance))

        range_checks.append(RangeCheck(case, printed["scenario"], "curvature",
                                       printed["curvature"], analysis.curvature,
                                       printed["curvature"] == analysis.curvature))

        printed_q = QuadraticUtility(**printed["coefficients"])
        sign = printed["printed_range"]["lambda_sign"]
        side = _printed_range_side(printed_q, printed["boundary"], sign)
        range_checks.append(RangeCheck(case, printed["scenario"], f"lambda_{sign}_side",
                                       printed["printed_range"]["side"], side,
                                       printed["printed_range"]["side"] == side))

    consistency: List[ConsistencyCheck] = []
    for printed in dataset["simulations"]:
        table = f"Table {printed['table']}"
        oracle = analytic_values(params, scenarios[printed["scenario"]], instances[printed["instance"]])
        put_band = consistency_band(printed["put_variance"], replications)
        consistency.append(ConsistencyCheck(
            table, "put_price", printed["put_price"], oracle.put_price, put_band,
            abs(printed["put_price"] - oracle.put_price) <= put_band,
        ))
        asset_band = consistency_band(printed["asset_variance"], replications)
        consistency.append(ConsistencyCheck(
            table, "asset_value", printed["asset_value"], oracle.expected_asset, asset_band,
            abs(printed["asset_value"] - oracle.expected_asset) <= asset_band,
        ))

    report = DiscrepancyReport(
        entries=entries,
        tolerance=tolerance,
        consistency=consistency,
        range_checks=range_checks,
        dataset_version=str(dataset["dataset_version"]),
    )
    if report.has_mismatch:
        logger.warning("replication found %d mismatching cells", report.mismatch_count)
    return report


def repeated_excess_study(params: MarketParams,
                          scenario: ScenarioSpec,
                          instances: Sequence[MoveInstance],
                          replications: int,
                          seeds: Sequence[int],
                          workers: int = 1) -> pd.DataFrame:
    """
    Re-runs the Monte Carlo pricing of one scenario under many seeds

    Returns:
        study(pd.DataFrame):
            one row per (seed, instance) with columns
            seed, instance, put_price, excess_equity, rank
            where rank 1 is the smallest excess equity within a seed
    """
    if not seeds:
        raise ValidationError("repeated_excess_study needs at least one seed")

    records = []
    for seed in seeds:
        for instance_index, instance in enumerate(instances):
            estimate = mc_estimate(params, scenario, instance, replications,
                                   cell_seed(seed, 0, instance_index), workers)
            a1 = equity_table_a1(scenario, instance)
            a2 = equity_table_a2(params, scenario, instance, estimate.put_price_mean)
            records.append({
                "seed": int(seed),
                "instance": instance.ordinal,
                "put_price": estimate.put_price_mean,
                "excess_equity": a2.total - a1.total,
            })

    study = pd.DataFrame(records)
    study["rank"] = study.groupby("seed")["excess_equity"].rank(method="first").astype(int)
    return study


def rank_frequencies(study: pd.DataFrame) -> pd.DataFrame:
    """Share of seeds in which each instance took each excess-equity rank."""
    return pd.crosstab(study["instance"], study["rank"], normalize="index")


def fitted_curvature_counts(study: pd.DataFrame, scheme: UtilityIndexScheme) -> Dict[str, int]:
    """How often each curvature class comes out of the per-seed fits."""
    counts: Dict[str, int] = {}
    for _, group in study.sort_values(["seed", "instance"]).groupby("seed"):
        try:
            q = fit_quadratic(assign_utility_indices(group["excess_equity"].tolist(), scheme))
            label = curvature_of(q)
        except ValidationError:
            label = "unfit"
        counts[label] = counts.get(label, 0) + 1
    return counts
