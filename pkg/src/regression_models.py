"""
Least-squares regression baseline: multivariate OLS and one-variable polynomials
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    format_float,
    format_floats,
    parse_floats,
    read_kv_file,
    write_kv_file,
)
from error_handling import (
    DegreeZeroError,
    InvalidConfigError,
    InvalidModelFileError,
    RankDeficientError,
    ShapeMismatchError,
    TooFewRowsError,
)
from logger import get_logger
from timeseries_data import SupervisedMatrix

logger = get_logger("epiforecast.regression")

MODEL_FORMAT = "regression/1"


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Intercept plus one coefficient per feature, with the training RSS"""

    intercept: float
    coefficients: np.ndarray
    feature_names: Tuple[str, ...]
    rss: float = 0.0

    def __post_init__(self):
        coefficients = np.atleast_1d(np.array(self.coefficients, dtype=float))
        if len(coefficients) != len(self.feature_names):
            raise ShapeMismatchError(
                f"{len(coefficients)} coefficients for "
                f"{len(self.feature_names)} features"
            )
        if self.rss < 0:
            raise InvalidModelFileError(f"rss must be >= 0, got {self.rss}")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "rss", float(self.rss))

    @property
    def n_features(self) -> int:
        return len(self.coefficients)


def fit_ols(m: SupervisedMatrix, ridge: float = 0.0) -> RegressionModel:
    """Minimize sum (y - b0 - x.b)^2, optionally with an explicit ridge penalty"""
    if m.y is None:
        raise ShapeMismatchError("fit_ols needs a target vector")
    if ridge < 0:
        raise InvalidConfigError(f"ridge must be >= 0, got {ridge}")
    n, p = m.X.shape
    if n <= p + 1:
        raise TooFewRowsError(f"{n} rows cannot fit an intercept plus {p} features")

    design = np.column_stack([np.ones(n), m.X])
    if ridge == 0.0 and np.linalg.matrix_rank(design) < p + 1:
        raise RankDeficientError(
            f"design matrix over {', '.join(m.feature_names)} is rank deficient"
        )

    if ridge > 0.0:
        # Penalize the slopes only; the intercept stays free
        penalty = np.sqrt(ridge) * np.eye(p + 1)[1:]
        solve_design = np.vstack([design, penalty])
        solve_target = np.concatenate([m.y, np.zeros(p)])
    else:
        solve_design, solve_target = design, m.y

    beta, *_ = np.linalg.lstsq(solve_design, solve_target, rcond=None)
    residuals = m.y - design @ beta
    rss = float(residuals @ residuals)
    logger.debug("OLS fit on %d rows x %d features, rss=%g", n, p, rss)
    return RegressionModel(
        intercept=beta[0],
        coefficients=beta[1:],
        feature_names=m.feature_names,
        rss=max(rss, 0.0),
    )


def expand_polynomial(
    x: Sequence[float],
    degree: int,
    y: Optional[Sequence[float]] = None,
    name: str = "x",
    days: Optional[Sequence[int]] = None,
) -> SupervisedMatrix:
    """Columns x, x^2, ..., x^degree of a single variable"""
    if degree < 1:
        raise DegreeZeroError(f"polynomial degree must be >= 1, got {degree}")
    x = np.asarray(x, dtype=float).reshape(-1)
    X = np.column_stack([x**k for k in range(1, degree + 1)])
    names = tuple(name if k == 1 else f"{name}^{k}" for k in range(1, degree + 1))
    return SupervisedMatrix(X=X, y=y, feature_names=names, days=days)


def predict(
    model: RegressionModel, X: Union[SupervisedMatrix, np.ndarray, Sequence]
) -> np.ndarray:
    """y_hat = b0 + x.b for each row"""
    if isinstance(X, SupervisedMatrix):
        if X.feature_names != model.feature_names:
            raise ShapeMismatchError(
                f"model features {model.feature_names} != data features "
                f"{X.feature_names}"
            )
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if model.n_features == 1 else X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise ShapeMismatchError(
            f"model expects {model.n_features} columns, got {X.shape[1]}"
        )
    return model.intercept + X @ model.coefficients


def round_counts(forecast) -> np.ndarray:
    """Round half away from zero, then clamp at zero"""
    values = np.asarray(forecast, dtype=float)
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.maximum(rounded, 0).astype(np.int64)


def save_regression_model(model: RegressionModel, path) -> None:
    write_kv_file(
        path,
        {
            "format": MODEL_FORMAT,
            "feature_names": ",".join(model.feature_names),
            "intercept": format_float(model.intercept),
            "coefficients": format_floats(model.coefficients),
            "rss": format_float(model.rss),
        },
    )


def load_regression_model(path) -> RegressionModel:
    values = read_kv_file(path)
    if values.get("format") != MODEL_FORMAT:
        raise InvalidModelFileError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        return RegressionModel(
            intercept=float(values["intercept"]),
            coefficients=parse_floats(values["coefficients"]),
            feature_names=tuple(values["feature_names"].split(",")),
            rss=float(values["rss"]),
        )
    except (KeyError, ValueError) as e:
        raise InvalidModelFileError(f"{path}: {e}") from None
