"""
Forecast error metrics and model comparison reports
"""

from dataclasses import dataclass
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import DISPLAY_DECIMALS, REPORT_COLUMNS, Stage
from error_handling import (
    AllActualsZeroError,
    EmptyInputError,
    InvalidStageError,
    LengthMismatchError,
)


def _pair(actual, forecast) -> Tuple[np.ndarray, np.ndarray]:
    actual = np.asarray(actual, dtype=float).reshape(-1)
    forecast = np.asarray(forecast, dtype=float).reshape(-1)
    if len(actual) != len(forecast):
        raise LengthMismatchError(f"{len(actual)} actuals vs {len(forecast)} forecasts")
    if len(actual) == 0:
        raise EmptyInputError("metrics need at least one point")
    return actual, forecast


def mse(actual, forecast) -> float:
    """Mean squared error"""
    actual, forecast = _pair(actual, forecast)
    return float(np.mean((actual - forecast) ** 2))


def mape_with_skipped(actual, forecast) -> Tuple[float, int]:
    """MAPE as a fraction over nonzero actuals, with the count of skipped points"""
    actual, forecast = _pair(actual, forecast)
    nonzero = actual != 0
    if not np.any(nonzero):
        raise AllActualsZeroError("every actual value is zero")
    ratios = np.abs(actual[nonzero] - forecast[nonzero]) / np.abs(actual[nonzero])
    return float(np.mean(ratios)), int(np.sum(~nonzero))


def mape(actual, forecast) -> float:
    """Mean absolute percentage error as a fraction (0.52, not 52%)"""
    return mape_with_skipped(actual, forecast)[0]


def mae(actual, forecast) -> float:
    """Mean absolute error; used to judge adjustment factors, not reported"""
    actual, forecast = _pair(actual, forecast)
    return float(np.mean(np.abs(actual - forecast)))


@dataclass(frozen=True)
class EvaluationRow:
    model: str
    stage: str
    mse: float
    mape: float
    n_points: int
    n_skipped_zero_actual: int = 0


@dataclass(frozen=True)
class EvaluationReport:
    """Per-model, per-stage MSE/MAPE rows in input order"""

    rows: Tuple[EvaluationRow, ...] = ()

    def find(self, model: str, stage: str) -> Optional[EvaluationRow]:
        for row in self.rows:
            if row.model == model and row.stage == stage:
                return row
        return None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (r.model, r.stage, r.mse, r.mape, r.n_points, r.n_skipped_zero_actual)
                for r in self.rows
            ],
            columns=list(REPORT_COLUMNS),
        )

    def to_csv(self, stream: Union[str, IO]) -> None:
        """Machine-readable report at full precision"""
        self.to_frame().to_csv(stream, index=False, lineterminator="\n")

    def to_markdown(self, decimals: int = DISPLAY_DECIMALS) -> str:
        """Aligned-column markdown table with rounded metrics"""
        cells = [list(REPORT_COLUMNS)]
        for r in self.rows:
            cells.append(
                [
                    r.model,
                    r.stage,
                    f"{r.mse:.{decimals}f}",
                    f"{r.mape:.{decimals}f}",
                    str(r.n_points),
                    str(r.n_skipped_zero_actual),
                ]
            )
        widths = [max(len(row[i]) for row in cells) for i in range(len(REPORT_COLUMNS))]
        numeric = {2, 3, 4, 5}

        def line(row: List[str]) -> str:
            padded = [
                cell.rjust(w) if i in numeric else cell.ljust(w)
                for i, (cell, w) in enumerate(zip(row, widths))
            ]
            return "| " + " | ".join(padded) + " |"

        rule = "|" + "|".join(
            "-" * (w + 1) + ":" if i in numeric else "-" * (w + 2)
            for i, w in enumerate(widths)
        ) + "|"
        body = [line(row) for row in cells[1:]]
        return "\n".join([line(cells[0]), rule] + body) + "\n"


Entry = Tuple[str, str, Sequence[float], Sequence[float]]


def compare_report(entries: Iterable[Entry]) -> EvaluationReport:
    """One row per (label, stage, actual, forecast) entry"""
    stages = {s.value for s in Stage}
    rows = []
    for label, stage, actual, forecast in entries:
        stage = stage.value if isinstance(stage, Stage) else str(stage)
        if stage not in stages:
            raise InvalidStageError(
                f"stage must be one of {sorted(stages)}, got {stage!r}"
            )
        value, skipped = mape_with_skipped(actual, forecast)
        rows.append(
            EvaluationRow(
                model=label,
                stage=stage,
                mse=mse(actual, forecast),
                mape=value,
                n_points=len(np.asarray(actual).reshape(-1)),
                n_skipped_zero_actual=skipped,
            )
        )
    return EvaluationReport(tuple(rows))


def long_horizon_degradation(report: EvaluationReport, model: str) -> Optional[bool]:
    """True when the model's test MSE exceeds its validation MSE"""
    validation = report.find(model, Stage.VALIDATION.value)
    test = report.find(model, Stage.TEST.value)
    if validation is None or test is None:
        return None
    return test.mse > validation.mse
