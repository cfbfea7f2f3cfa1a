"""
Tests for forecast error metrics and comparison reports
"""

import sys
import os
import io

import numpy as np
import pandas as pd
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from config import Stage
from error_handling import (
    AllActualsZeroError,
    EmptyInputError,
    InvalidStageError,
    LengthMismatchError,
)
from evaluation import (
    EvaluationReport,
    compare_report,
    long_horizon_degradation,
    mae,
    mape,
    mape_with_skipped,
    mse,
)

ACTUAL = [4, 6, 3, 2, 5]
ANN = [2, 4, 1, 1, 2]
REGRESSION = [2, 5, 1, 1, 3]
ADJUSTED = [2, 5, 2, 2, 3]


def test_mse_table_values():
    """Test MSE of both validation forecasts"""
    assert mse(ACTUAL, ANN) == pytest.approx(4.40, abs=1e-12)
    assert mse(ACTUAL, REGRESSION) == pytest.approx(2.8, abs=1e-12)
    assert mse(ACTUAL, ADJUSTED) == pytest.approx(2.0, abs=1e-12)
    assert mse(ACTUAL, ACTUAL) == 0.0


def test_mape_table_values():
    """Test MAPE as a fraction"""
    assert mape(ACTUAL, ANN) == pytest.approx(0.52, abs=5e-4)
    assert mape(ACTUAL, REGRESSION) == pytest.approx(0.447, abs=5e-4)
    assert mape(ACTUAL, ADJUSTED) == pytest.approx(0.28, abs=5e-4)
    assert mape(ACTUAL, ACTUAL) == 0.0


def test_mape_skips_zero_actuals():
    """Test that zero actuals are skipped and counted"""
    value, skipped = mape_with_skipped([0, 4, 0, 2], [1, 2, 5, 2])
    assert value == pytest.approx(0.25)
    assert skipped == 2
    with pytest.raises(AllActualsZeroError):
        mape([0, 0], [1, 2])


def test_metric_errors():
    """Test length and emptiness checks"""
    with pytest.raises(LengthMismatchError):
        mse([1, 2], [1])
    with pytest.raises(LengthMismatchError):
        mape([1, 2], [1, 2, 3])
    with pytest.raises(EmptyInputError):
        mse([], [])


def test_mae():
    """Test mean absolute error"""
    assert mae(ACTUAL, ANN) == pytest.approx(2.0)


def test_permutation_invariance():
    """Test simultaneous permutation of actuals and forecasts"""
    order = [3, 0, 4, 1, 2]
    actual = np.array(ACTUAL)[order]
    forecast = np.array(ANN)[order]
    assert mse(actual, forecast) == pytest.approx(mse(ACTUAL, ANN))
    assert mape(actual, forecast) == pytest.approx(mape(ACTUAL, ANN))


def test_scale_laws():
    """Test MSE scales by c^2 and MAPE is scale-free"""
    c = 3.5
    actual, forecast = np.array(ACTUAL) * c, np.array(REGRESSION) * c
    assert mse(actual, forecast) == pytest.approx(c**2 * mse(ACTUAL, REGRESSION))
    assert mape(actual, forecast) == pytest.approx(mape(ACTUAL, REGRESSION))


def test_compare_report_validation_rows():
    """Test the validation comparison rows"""
    report = compare_report(
        [
            ("Regression", "validation", ACTUAL, REGRESSION),
            ("ANN", Stage.VALIDATION, ACTUAL, ANN),
        ]
    )
    assert [(r.model, r.stage) for r in report.rows] == [
        ("Regression", "validation"),
        ("ANN", "validation"),
    ]
    assert report.rows[0].mse == pytest.approx(2.8)
    assert report.rows[0].mape == pytest.approx(0.4467, abs=1e-4)
    assert report.rows[1].mse == pytest.approx(4.40)
    assert report.rows[1].mape == pytest.approx(0.52)
    assert report.rows[1].n_points == 5
    assert report.find("ANN", "validation") is report.rows[1]
    assert report.find("ANN", "test") is None


def test_compare_report_trivial():
    """Test empty and zero-error reports"""
    assert compare_report([]).rows == ()
    row = compare_report([("X", "fitting", [1, 2], [1, 2])]).rows[0]
    assert (row.mse, row.mape) == (0.0, 0.0)


def test_compare_report_bad_stage():
    """Test stage labels outside fitting/validation/test"""
    with pytest.raises(InvalidStageError):
        compare_report([("X", "training", [1], [1])])


def test_report_markdown():
    """Test the aligned three-decimal table"""
    report = compare_report(
        [
            ("Regression", "validation", ACTUAL, REGRESSION),
            ("ANN", "validation", ACTUAL, ANN),
        ]
    )
    lines = report.to_markdown().splitlines()
    assert lines[0].split("|")[1].strip() == "model"
    assert len({len(line) for line in lines}) == 1
    assert "2.800" in lines[2] and "0.447" in lines[2]
    assert "4.400" in lines[3] and "0.520" in lines[3]


def test_report_csv():
    """Test the machine-readable report keeps full precision"""
    report = compare_report([("Regression", "validation", ACTUAL, REGRESSION)])
    buffer = io.StringIO()
    report.to_csv(buffer)
    assert buffer.getvalue().splitlines()[0] == "model,stage,mse,mape,n,skipped"
    buffer.seek(0)
    frame = pd.read_csv(buffer)
    assert frame.loc[0, "mape"] == pytest.approx(mape(ACTUAL, REGRESSION), abs=1e-15)


def test_long_horizon_degradation():
    """Test the test-versus-validation MSE comparison"""
    report = compare_report(
        [
            ("ANN", "validation", [4, 6], [4, 5]),
            ("ANN", "test", [9, 10], [6, 6]),
            ("Regression", "validation", [4, 6], [4, 6]),
        ]
    )
    assert long_horizon_degradation(report, "ANN") is True
    assert long_horizon_degradation(report, "Regression") is None
    assert long_horizon_degradation(EvaluationReport(), "ANN") is None
