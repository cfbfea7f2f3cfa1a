"""
epiforecast - Daily death forecasts from hospital case counts
Regression baseline and backpropagation network, with adaptive adjustment.
"""

from timeseries_data import Dataset, SplitSpec, parse_csv, make_supervised
from regression_models import fit_ols, predict
from mlp_network import MLPModel, train, select_architecture
from adaptive_forecast import estimate_adjustment, forecast_series
from evaluation import mse, mape, compare_report
from config import *

__version__ = "1.0.0"
__all__ = [
    "Dataset",
    "SplitSpec",
    "parse_csv",
    "make_supervised",
    "fit_ols",
    "predict",
    "MLPModel",
    "train",
    "select_architecture",
    "estimate_adjustment",
    "forecast_series",
    "mse",
    "mape",
    "compare_report",
]
