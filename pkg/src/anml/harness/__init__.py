from .config import ConfigError, ExperimentConfig, from_dict, load
from .experiment import ExperimentResult, TrialResult, run_experiment, run_trial
from .report import ReportError, emit_report
from .stats import SummaryStats, cohens_d, improvement, paired_ttest, summarize

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "ReportError",
    "SummaryStats",
    "TrialResult",
    "cohens_d",
    "emit_report",
    "from_dict",
    "improvement",
    "load",
    "paired_ttest",
    "run_experiment",
    "run_trial",
    "summarize",
]
