"""
Config-based experiment runner
Supports multiple pricing setups defined in YAML
"""

import logging
import sys
import tempfile
from pathlib import Path

# Add project root to path so we can import from root directory
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import yaml
import mlflow
import numpy as np
import pandas as pd
from typing import Dict, List

from put_insurance_lab import PutInsuranceLab
from src.report_functions import (
    ExperimentConfig,
    excess_summary,
    load_config,
    override_config,
    write_outputs,
)
from src.strategy_functions import rank_frequencies, fitted_curvature_counts

logger = logging.getLogger(__name__)


# =====================================================
# EXPERIMENT IMPLEMENTATIONS
# =====================================================

def _lab_for(base: ExperimentConfig, params: Dict, source: str) -> PutInsuranceLab:
    config = override_config(
        base,
        source=source,
        replications=params.get('replications'),
        seed=params.get('seed'),
        workers=params.get('workers'),
    )
    return PutInsuranceLab(config)


def _report_metrics(report) -> Dict:
    metrics = dict(excess_summary(report))
    fitted = [p for p in report.utility if p.fit is not None]
    metrics['fitted_pipelines'] = len(fitted)
    metrics['diagnostics'] = len(report.diagnostics)
    for pipeline in fitted:
        key = f"{pipeline.scenario}_{pipeline.pipeline}"
        metrics[f"a2_{key}"] = pipeline.fit.a2
        if pipeline.analysis.vertex_x is not None:
            metrics[f"vertex_{key}"] = pipeline.analysis.vertex_x
    if report.discrepancies is not None:
        metrics['mismatch_count'] = report.discrepancies.mismatch_count
    return metrics


def _run_report(lab: PutInsuranceLab) -> Dict:
    report = lab.report()
    with tempfile.TemporaryDirectory() as tmp:
        for path in write_outputs(report, tmp, ("json",)):
            mlflow.log_artifact(str(path))
    return _report_metrics(report)


def paper_fixed(base: ExperimentConfig, params: Dict) -> Dict:
    """Printed simulated put prices; includes the table audit."""
    return _run_report(_lab_for(base, params, 'paper_fixed'))


def analytic(base: ExperimentConfig, params: Dict) -> Dict:
    """Exact enumeration prices (no Monte Carlo dispersion)."""
    return _run_report(_lab_for(base, params, 'analytic'))


def monte_carlo(base: ExperimentConfig, params: Dict) -> Dict:
    """Seeded Monte Carlo prices."""
    return _run_report(_lab_for(base, params, 'monte_carlo'))


def seed_sweep(base: ExperimentConfig, params: Dict) -> Dict:
    """
    Repeats the Monte Carlo pricing of one scenario under many seeds and
    records how often each instance takes each excess-equity rank.
    """
    lab = _lab_for(base, params, 'monte_carlo')
    first = params.get('seed_start', 0)
    count = params.get('seed_count', 50)
    study = lab.excess_study(params.get('scenario', 'D'), list(range(first, first + count)))

    frequencies = rank_frequencies(study)
    curvatures = fitted_curvature_counts(study, lab.config.index_scheme)

    with tempfile.TemporaryDirectory() as tmp:
        study_path = Path(tmp) / "seed_sweep.csv"
        study.to_csv(study_path, index=False)
        mlflow.log_artifact(str(study_path))

    metrics = {
        'seeds': count,
        'std_excess_equity': float(np.std(study['excess_equity'])),
    }
    for instance, row in frequencies.iterrows():
        for rank, share in row.items():
            metrics[f"rank_share_{instance}_{rank}"] = float(share)
    for label, times in curvatures.items():
        metrics[f"curvature_{label}"] = times
    return metrics


# Experiment registry - maps string names to functions
EXPERIMENTS = {
    'paper_fixed': paper_fixed,
    'analytic': analytic,
    'monte_carlo': monte_carlo,
    'seed_sweep': seed_sweep,
}


# =====================================================
# EXPERIMENT RUNNER
# =====================================================

def resolve_tracking_uri(uri: str, config_dir: Path) -> str:
    """Relative sqlite:/// store paths are taken relative to the config file's directory."""
    prefix = "sqlite:///"
    if uri.startswith(prefix):
        store = Path(uri[len(prefix):])
        if not store.is_absolute():
            return prefix + (Path(config_dir) / store).resolve().as_posix()
    return uri


def run_from_config(config_file: str, summary_file: str = "experiment_results.csv") -> pd.DataFrame:
    """Run experiments from YAML config file with experiment selection."""

    # Load config
    with open(config_file, 'r') as f:
        config = yaml.safe_load(f)

    experiment_name = config['experiment']['name']
    lab_config_path = config['experiment'].get('lab_config')
    if lab_config_path is not None:
        lab_config_path = Path(config_file).parent / lab_config_path
        base = load_config(lab_config_path)
    else:
        base = ExperimentConfig()

    tracking_uri = config['experiment'].get('tracking_uri')
    if tracking_uri:
        mlflow.set_tracking_uri(resolve_tracking_uri(tracking_uri, Path(config_file).parent))
    mlflow.set_experiment(experiment_name)

    results: List[Dict] = []

    print(f"\n🚀 Starting experiment: {experiment_name}")
    print(f"   Running {len(config['runs'])} experiments...\n")

    for run_config in config['runs']:
        run_name = run_config['name']
        params = run_config.get('parameters', {})
        experiment_kind = params.get('algorithm', 'paper_fixed')

        if experiment_kind not in EXPERIMENTS:
            logger.warning("Unknown algorithm '%s', skipping %s", experiment_kind, run_name)
            print(f"⚠️  Unknown algorithm '{experiment_kind}', skipping {run_name}")
            continue

        with mlflow.start_run(run_name=run_name):

            # Log all parameters
            for key, value in params.items():
                mlflow.log_param(key, value)

            metrics = EXPERIMENTS[experiment_kind](base, params)

            for key, value in metrics.items():
                mlflow.log_metric(key, value)

            print(f"✅ {run_name:30s} [{experiment_kind:12s}] metrics={len(metrics)}")
            results.append({**params, **metrics, 'run_name': run_name})

    df = pd.DataFrame(results)
    df.to_csv(summary_file, index=False)

    print(f"\n{'='*60}")
    print("  EXPERIMENT SUMMARY")
    print(f"{'='*60}")
    print(f"\n📊 Results saved to: {summary_file}")
    print(f"🔍 View in MLflow: mlflow ui --port 5000")
    print(f"{'='*60}\n")
    return df


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.WARNING,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )

    if len(sys.argv) < 2:
        print("Usage: python experiments/run_experiments.py <config_file.yaml>")
        print("\nAvailable algorithms:")
        for name in EXPERIMENTS.keys():
            print(f"  - {name}")
        sys.exit(1)

    run_from_config(sys.argv[1])
