"""
Forecast denormalization with adjustment factors for systematic over- or
under-estimation observed on validation data.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from config import (
    ADJUSTMENT_CLAMP,
    ADJUSTMENT_TOL,
    AdjustmentMode,
    format_float,
    read_kv_file,
    write_kv_file,
)
from error_handling import (
    EmptyInputError,
    InconsistentFactorsError,
    InvalidModelFileError,
    LengthMismatchError,
    MissingNormalizationError,
    ShapeMismatchError,
)
from logger import get_logger
from mlp_network import MLPModel, predict_normalized
from regression_models import RegressionModel, predict, round_counts
from timeseries_data import (
    NormalizationParams,
    SupervisedMatrix,
    clip_count,
    denormalize,
    normalize,
)

logger = get_logger("epiforecast.adjust")


@dataclass(frozen=True)
class AdjustmentFactors:
    """Adjusted denormalization bounds; unused bounds equal the training ones"""

    mode: AdjustmentMode
    max_adj: float
    min_adj: float
    mean_deviation: float = 0.0

    @classmethod
    def none(cls, p: NormalizationParams) -> "AdjustmentFactors":
        return cls(AdjustmentMode.NONE, float(p.maxs[0]), float(p.mins[0]), 0.0)


def _target_bounds(p: NormalizationParams) -> Tuple[float, float]:
    if p.n_features != 1:
        raise InconsistentFactorsError(
            "target normalization must have exactly one bound"
        )
    return float(p.mins[0]), float(p.maxs[0])


def effective_bounds(
    p: NormalizationParams, f: AdjustmentFactors
) -> Tuple[float, float]:
    """(low, high) used to map a unit-interval output back to target units"""
    low, high = _target_bounds(p)
    if f.mode in (AdjustmentMode.MIN_ADJUSTED, AdjustmentMode.BOTH_ADJUSTED):
        low = f.min_adj
    if f.mode in (AdjustmentMode.MAX_ADJUSTED, AdjustmentMode.BOTH_ADJUSTED):
        high = f.max_adj
    if not high > low:
        raise InconsistentFactorsError(
            f"effective max {high} must exceed effective min {low} ({f.mode.value})"
        )
    return low, high


def estimate_adjustment(
    actual,
    plain_forecasts,
    p: NormalizationParams,
    tol: float = ADJUSTMENT_TOL,
    clamp: float = ADJUSTMENT_CLAMP,
) -> AdjustmentFactors:
    """Shift the floor up for underestimates, the ceiling down for overestimates"""
    actual = np.asarray(actual, dtype=float).reshape(-1)
    plain_forecasts = np.asarray(plain_forecasts, dtype=float).reshape(-1)
    if len(actual) != len(plain_forecasts):
        raise LengthMismatchError(
            f"{len(actual)} actuals vs {len(plain_forecasts)} forecasts"
        )
    if len(actual) == 0:
        raise EmptyInputError("adjustment needs at least one validation point")

    low, high = _target_bounds(p)
    mean_deviation = float(np.mean(actual - plain_forecasts))
    limit = clamp * (high - low)
    shift = min(abs(mean_deviation), limit)

    if mean_deviation > tol:
        factors = AdjustmentFactors(
            AdjustmentMode.MIN_ADJUSTED, high, low + shift, mean_deviation
        )
    elif mean_deviation < -tol:
        factors = AdjustmentFactors(
            AdjustmentMode.MAX_ADJUSTED, high - shift, low, mean_deviation
        )
    else:
        factors = AdjustmentFactors(AdjustmentMode.NONE, high, low, mean_deviation)
    logger.info(
        "Adjustment %s (mean deviation %.6g, min %.6g, max %.6g)",
        factors.mode.value,
        mean_deviation,
        factors.min_adj,
        factors.max_adj,
    )
    return factors


def apply_forecast(u, p: NormalizationParams, f: AdjustmentFactors):
    """u * (effective max - effective min) + effective min"""
    low, high = effective_bounds(p, f)
    if f.mode is AdjustmentMode.NONE:
        return denormalize(u, p)
    return denormalize(u, NormalizationParams([low], [high], p.feature_names))


def forecast_values(
    model: Union[MLPModel, RegressionModel],
    X,
    target_params: Optional[NormalizationParams] = None,
    factors: Optional[AdjustmentFactors] = None,
    feature_params: Optional[NormalizationParams] = None,
) -> np.ndarray:
    """Unrounded forecasts in target units"""
    if isinstance(model, RegressionModel):
        return np.asarray(predict(model, X), dtype=float)
    if feature_params is None or target_params is None:
        raise MissingNormalizationError(
            "network forecasts need feature and target bounds"
        )
    if isinstance(X, SupervisedMatrix):
        if X.feature_names != feature_params.feature_names:
            raise ShapeMismatchError(
                f"network features {feature_params.feature_names} != data features "
                f"{X.feature_names}"
            )
        X = X.X
    features = np.asarray(X, dtype=float)
    clipped = clip_count(features, feature_params)
    if clipped:
        logger.warning(
            "Clipped %d feature value(s) outside the training range", clipped
        )
    u = predict_normalized(model, normalize(features, feature_params))
    if factors is None:
        factors = AdjustmentFactors.none(target_params)
    return np.asarray(apply_forecast(u, target_params, factors), dtype=float)


def forecast_series(
    model: Union[MLPModel, RegressionModel],
    X,
    target_params: Optional[NormalizationParams] = None,
    factors: Optional[AdjustmentFactors] = None,
    feature_params: Optional[NormalizationParams] = None,
) -> np.ndarray:
    """Integer death-count forecasts: model output, denormalized, rounded"""
    return round_counts(
        forecast_values(model, X, target_params, factors, feature_params)
    )


def save_adjustment(f: AdjustmentFactors, path) -> None:
    write_kv_file(
        path,
        {
            "mode": f.mode.value,
            "max_adj": format_float(f.max_adj),
            "min_adj": format_float(f.min_adj),
            "mean_deviation": format_float(f.mean_deviation),
        },
    )


def load_adjustment(path) -> AdjustmentFactors:
    values = read_kv_file(path)
    try:
        return AdjustmentFactors(
            mode=AdjustmentMode(values["mode"]),
            max_adj=float(values["max_adj"]),
            min_adj=float(values["min_adj"]),
            mean_deviation=float(values["mean_deviation"]),
        )
    except (KeyError, ValueError) as e:
        raise InvalidModelFileError(f"{path}: {e}") from None
