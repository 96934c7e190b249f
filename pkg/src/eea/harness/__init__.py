from .config import ConfigError, ExperimentConfig, build_config, load_config_file, parse_config_text
from .experiments import pretrain_predprey_models, run_experiment, seed_streams
from .records import (
    RunRecord,
    SummaryRow,
    read_csv,
    read_summary_csv,
    summarize,
    write_csv,
    write_summary_csv,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_config",
    "load_config_file",
    "parse_config_text",
    "pretrain_predprey_models",
    "run_experiment",
    "seed_streams",
    "RunRecord",
    "SummaryRow",
    "read_csv",
    "read_summary_csv",
    "summarize",
    "write_csv",
    "write_summary_csv",
]
