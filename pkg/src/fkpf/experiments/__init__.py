"""Monte Carlo tracking experiments, empirical bound checks and CSV output."""

from .config import ExperimentConfig, compression_factor
from .harness import AggregateMetrics, RunCache, TrialResult, run_monte_carlo, run_trial

__all__ = [
    "AggregateMetrics", "ExperimentConfig", "RunCache", "TrialResult", "compression_factor",
    "run_monte_carlo", "run_trial",
]
