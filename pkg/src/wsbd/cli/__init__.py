from .config import ExperimentConfig, config_from_mapping, load_config
from .main import main
from .runner import REPORT_COLUMNS, RunRecord, ablate, aggregate, grid, grid_cells, report, run, train_one

__all__ = ["REPORT_COLUMNS", "ExperimentConfig", "RunRecord", "ablate", "aggregate", "config_from_mapping",
           "grid", "grid_cells", "load_config", "main", "report", "run", "train_one"]
