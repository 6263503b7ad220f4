"""
Protective Put Lab - Complete Implementation
Prices the put on the one-step trinomial tree, compares the insured and the
uninsured strategy, derives the utility curves, and audits the printed tables.
"""
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from src.lab_errors import StationaryPointError, ValidationError
from src.market_core_functions import PAPER_SCENARIOS, MoveInstance, ScenarioSpec
from src.payoff_theory_functions import OrderingReport, PositionSpec, verify_preference_ordering
from src.pricing_functions import analytic_values, cell_seed, mc_estimate
from src.report_functions import (
    AS_PRINTED,
    PAPER_FIXED,
    ExperimentConfig,
    ExperimentReport,
    UtilityPipeline,
    load_config,
    override_config,
    run_report,
    validate_config,
    write_outputs,
)
from src.strategy_functions import (
    DEFAULT_TOLERANCE,
    MONTE_CARLO,
    DiscrepancyReport,
    PriceSource,
    SuiteResult,
    load_paper_dataset,
    replicate_paper,
    repeated_excess_study,
    run_suite,
)
from src.utility_functions import QuadraticUtility, ara, classify_risk_attitude

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "PUTLAB_SEED"
UNDEFINED_LAMBDA = "undefined at stationary point"


def resolve_seed(flag_seed: Optional[int], config_seed: int) -> int:
    """
    Seed precedence: explicit flag, then PUTLAB_SEED, then the config value.

    Raises:
        ValidationError: PUTLAB_SEED is set but not an integer
    """
    if flag_seed is not None:
        return flag_seed
    env_seed = os.getenv(SEED_ENV_VAR)
    if env_seed is not None and env_seed.strip():
        try:
            return int(env_seed)
        except ValueError as e:
            raise ValidationError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from e
    return config_seed


class PutInsuranceLab:
    """
    Protective-put portfolio-insurance lab using:
    - Seeded Monte Carlo or exact enumeration of the trinomial put price
    - Expected change in equity of A1 (long asset) and A2 (asset + put)
    - Rank-based utility indices and quadratic utility fits
    """

    def __init__(self, config: Optional[ExperimentConfig] = None, dataset_path: Optional[Path] = None):
        """
        Args:
            config: validated lab configuration; the printed-study defaults when None
            dataset_path: printed-values dataset; the packaged one when None
        """
        self.config = validate_config(config if config is not None else ExperimentConfig())
        self.dataset_path = dataset_path
        self._dataset = None

    @classmethod
    def from_file(cls,
                  path=None,
                  seed: Optional[int] = None,
                  replications: Optional[int] = None,
                  workers: Optional[int] = None) -> "PutInsuranceLab":
        """Builds a lab from a config file (or the defaults) plus command-line overrides."""
        config = load_config(path) if path is not None else ExperimentConfig()
        config = override_config(
            config,
            seed=resolve_seed(seed, config.seed),
            replications=replications,
            workers=workers,
        )
        return cls(config)

    @property
    def dataset(self) -> dict:
        if self._dataset is None:
            self._dataset = load_paper_dataset(self.dataset_path)
        return self._dataset

    def scenario(self, label: str) -> ScenarioSpec:
        for scenario in self.config.scenarios:
            if scenario.label == label:
                return scenario
        known = [s.label for s in self.config.scenarios]
        raise ValidationError(f"unknown scenario {label!r}; configured scenarios are {known}")

    def instance(self, ordinal: int) -> MoveInstance:
        for instance in self.config.instances:
            if instance.ordinal == ordinal:
                return instance
        known = [i.ordinal for i in self.config.instances]
        raise ValidationError(f"unknown instance {ordinal}; configured instances are {known}")

    def price(self, scenario_label: str, ordinal: int, source: str = "analytic") -> Dict:
        """
        Put price of one cell.

        Returns:
            Dict: put_price plus the oracle values and, for Monte Carlo, the estimate
        """
        scenario = self.scenario(scenario_label)
        instance = self.instance(ordinal)
        oracle = analytic_values(self.config.market, scenario, instance)
        result = {
            "scenario": scenario.label,
            "instance": instance.ordinal,
            "source": source,
            "oracle": oracle.to_dict(),
            "estimate": None,
        }

        if source == "analytic":
            result["put_price"] = oracle.put_price
        elif source == MONTE_CARLO:
            scenario_index = self.config.scenarios.index(scenario)
            instance_index = self.config.instances.index(instance)
            estimate = mc_estimate(
                self.config.market, scenario, instance,
                replications=self.config.replications,
                seed=cell_seed(self.config.seed, scenario_index, instance_index),
                workers=self.config.workers,
            )
            result["estimate"] = estimate.to_dict()
            result["put_price"] = estimate.put_price_mean
        elif source == PAPER_FIXED:
            result["put_price"] = PriceSource.paper_fixed(self.dataset).price_for(scenario, instance)
        else:
            raise ValidationError(f"unknown price source {source!r}")
        return result

    def suite(self) -> SuiteResult:
        dataset = self.dataset if self.config.source == PAPER_FIXED else None
        return run_suite(
            self.config.market,
            self.config.scenarios,
            self.config.instances,
            self.config.price_source(dataset),
            workers=self.config.workers,
        )

    def ordering_spaces(self) -> List[ScenarioSpec]:
        """U, N and D spaces: configured ones by label, the printed study's otherwise."""
        by_label = {s.label: s for s in PAPER_SCENARIOS}
        by_label.update({s.label: s for s in self.config.scenarios})
        return [by_label["U"], by_label["N"], by_label["D"]]

    def theorem(self, move: float, premium: float, allow_negative_premium: bool = True) -> OrderingReport:
        up, neutral, down = self.ordering_spaces()
        position = PositionSpec("call", premium, move)
        report = verify_preference_ordering(self.config.market, position, up, neutral, down)
        if report.negative_premium_warning and not allow_negative_premium:
            raise ValidationError("parity-derived put premium is negative for these inputs")
        return report

    def fit(self, as_printed: bool = False) -> List[UtilityPipeline]:
        """
        Utility pipelines of every scenario.

        Args:
            as_printed: keep the pipelines built from the printed excess equities
                instead of the recomputed ones (printed prices only)
        """
        if as_printed and self.config.source != PAPER_FIXED:
            raise ValidationError("printed excess equities exist only for the paper_fixed source")
        pipelines = self.report().utility
        if self.config.source != PAPER_FIXED:
            return list(pipelines)
        wanted = AS_PRINTED if as_printed else "recomputed"
        return [p for p in pipelines if p.pipeline == wanted]

    @staticmethod
    def risk_aversion(coefficients: Sequence[float], xs: Sequence[float]) -> List[Dict]:
        """Arrow-Pratt lambda and risk attitude at each x."""
        if len(coefficients) != 3:
            raise ValidationError(f"expected three coefficients a2,a1,a0, got {len(coefficients)}")
        q = QuadraticUtility(*(float(c) for c in coefficients))
        rows = []
        for x in xs:
            try:
                value = ara(q, float(x))
            except StationaryPointError:
                value = UNDEFINED_LAMBDA
            rows.append({"x": float(x), "lambda": value, "attitude": classify_risk_attitude(q, float(x))})
        return rows

    def replicate(self, tolerance: float = DEFAULT_TOLERANCE) -> DiscrepancyReport:
        return replicate_paper(tolerance=tolerance, dataset=self.dataset)

    def report(self) -> ExperimentReport:
        dataset = self.dataset if self.config.source == PAPER_FIXED else None
        return run_report(self.config, dataset)

    def write(self, report: ExperimentReport, directory=None, formats=None) -> List[Path]:
        paths = write_outputs(report, directory, formats)
        logger.info("report written to %s", directory or self.config.output_directory)
        return paths

    def excess_study(self, scenario_label: str, seeds: Sequence[int]) -> pd.DataFrame:
        """Monte Carlo excess equities of one scenario under many seeds."""
        return repeated_excess_study(
            self.config.market,
            self.scenario(scenario_label),
            self.config.instances,
            self.config.replications,
            seeds,
            workers=self.config.workers,
        )
