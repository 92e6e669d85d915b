from .config import ConfigError, ExperimentConfig, load_config, parse_regularizer, parse_space
from .reports import emit_report, load_record
from .runner import RunRecord, run_experiment, run_lower_bound, run_sweep

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_regularizer",
    "parse_space",
    "emit_report",
    "load_record",
    "RunRecord",
    "run_experiment",
    "run_lower_bound",
    "run_sweep",
]
