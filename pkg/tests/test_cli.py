"""
End-to-end tests for the command line
"""

import sys
import os
from pathlib import Path

import pandas as pd

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cli import main
from config import SyntheticSpec, read_kv_file
from synthetic import generate

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def _run(command, out, *extra):
    args = [command, "--out", str(out), "--data", str(out / "synthetic.csv")]
    return main(args + list(extra))


def _full_run(out, *extra):
    for command in ("synth", "train", "evaluate", "forecast", "plotdata"):
        assert _run(command, out, *extra) == 0


def _tree(root):
    files = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as stream:
                files[os.path.relpath(path, root)] = stream.read()
    return files


def test_synth_and_train(tmp_path, capsys):
    """Test that training writes models and runs every epoch"""
    assert _run("synth", tmp_path) == 0
    assert (tmp_path / "synthetic.csv").is_file()
    assert _run("train", tmp_path) == 0
    out = capsys.readouterr().out
    assert "Wrote 61 days" in out
    assert out.count("layers ") == 3 and out.count("*") == 1

    for name in ("regression.txt", "mlp.txt", "normalization.txt"):
        assert (tmp_path / "models" / name).is_file()
    report = read_kv_file(tmp_path / "train" / "train_report.txt")
    assert report["epochs_run"] == "1000"
    trace = pd.read_csv(tmp_path / "train" / "epoch_mse.csv")
    assert len(trace) == 1000
    assert list(trace.columns) == [
        "epoch",
        "layers_6-4-1",
        "layers_6-8-1",
        "layers_6-12-1",
    ]


def test_evaluate_forecast_plotdata(tmp_path, capsys):
    """Test the outputs of the later stages"""
    for command in ("synth", "train", "evaluate", "forecast", "plotdata"):
        assert _run(command, tmp_path) == 0
    out = capsys.readouterr().out
    assert "mode: " in out

    report = pd.read_csv(tmp_path / "evaluation" / "report.csv")
    assert list(zip(report["model"], report["stage"])) == [
        ("Regression", "fitting"),
        ("ANN", "fitting"),
        ("Regression", "validation"),
        ("ANN", "validation"),
        ("Regression", "test"),
        ("ANN", "test"),
    ]
    assert list(report["n"]) == [46, 46, 10, 10, 5, 5]

    forecast = pd.read_csv(tmp_path / "forecast" / "forecast.csv")
    assert list(forecast["day_index"]) == [57, 58, 59, 60, 61]
    assert (forecast["plain"] >= 0).all() and (forecast["adjusted"] >= 0).all()
    summary = read_kv_file(tmp_path / "forecast" / "summary.txt")
    assert summary["mode"] in ("none", "min_adjusted", "max_adjusted")

    table = pd.read_csv(tmp_path / "evaluation" / "forecast_table.csv")
    series = pd.read_csv(tmp_path / "synthetic.csv")
    cases = pd.read_csv(tmp_path / "plots" / "cases_deaths.csv")
    assert list(cases["deaths"]) == list(series["deaths"])
    assert list(cases["confirmed"]) == list(series["confirmed"])
    fit = pd.read_csv(tmp_path / "plots" / "network_fit.csv")
    assert len(fit) == 46
    held_out = pd.read_csv(tmp_path / "plots" / "heldout_forecasts.csv")
    later = table[table["stage"] != "fitting"]
    assert list(held_out["ann"]) == list(later["ann"])
    assert list(held_out["regression"]) == list(later["regression"])


def test_evaluate_fixture(tmp_path, capsys):
    """Test replaying stored validation forecasts"""
    path = os.path.join(FIXTURES, "validation_comparison.csv")
    assert main(["evaluate", "--fixture", path, "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    regression = next(line for line in lines if "Regression" in line)
    ann = next(line for line in lines if "ANN" in line)
    assert "2.800" in regression and "0.447" in regression
    assert "4.400" in ann and "0.520" in ann
    assert (tmp_path / "evaluation" / "report.md").is_file()


def test_forecast_fixture(tmp_path, capsys):
    """Test re-scoring stored plain and adjusted forecasts"""
    path = os.path.join(FIXTURES, "adjustment_comparison.csv")
    assert main(["forecast", "--fixture", path, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "plain_mse: 4.400" in out
    assert "plain_mape: 0.520" in out
    assert "adjusted_mse: 2.000" in out
    assert "adjusted_mape: 0.280" in out


def test_missing_data_file(tmp_path, capsys):
    """Test a missing input file"""
    assert _run("train", tmp_path) == 1
    err = capsys.readouterr().err
    assert "ERROR MissingInput: data file not found" in err


def test_range_out_of_bounds(tmp_path, capsys):
    """Test a test range past the end of the series"""
    assert _run("synth", tmp_path) == 0
    assert _run("train", tmp_path, "--set", "test_range=57-70") == 1
    assert "ERROR RangeOutOfBounds:" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    """Test an override for a key that does not exist"""
    assert _run("synth", tmp_path, "--set", "epochs=5") == 1
    assert "ERROR InvalidConfig:" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    """Test that --config is read and --set wins over it"""
    cfg = tmp_path / "run.cfg"
    cfg.write_text("synth.length = 30\nsynth.seed = 3\n", encoding="utf-8")
    extra = ("--config", str(cfg), "--set", "synth.length=40")
    assert _run("synth", tmp_path, *extra) == 0
    assert "Wrote 40 days" in capsys.readouterr().out


def test_runs_are_byte_identical(tmp_path, monkeypatch):
    """Test that two runs with the same settings write the same files"""
    trees = []
    for name in ("first", "second"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        _full_run(Path("run"))
        trees.append(_tree("run"))
    assert "run_config.cfg" in trees[0]
    assert trees[0] == trees[1]


def test_drift_degrades_long_horizon(tmp_path):
    """Test that a drifting series hurts the network more on the test days"""
    _full_run(tmp_path, "--set", "synth.drift=0.004")
    summary = read_kv_file(tmp_path / "evaluation" / "summary.txt")
    assert summary["ann_long_horizon_degradation"] == "true"
    report = pd.read_csv(tmp_path / "evaluation" / "report.csv")
    ann = report[report["model"] == "ANN"].set_index("stage")
    assert ann.loc["test", "mse"] > ann.loc["validation", "mse"]


def _train_quick(out, *extra):
    assert _run("synth", out, *extra) == 0
    assert _run("train", out, "--set", "max_epochs=50", *extra) == 0


def _future_rows(path, blank_deaths=False):
    frame = generate(SyntheticSpec(length=66)).to_frame().iloc[61:].copy()
    if blank_deaths:
        frame["deaths"] = ""
    else:
        frame = frame.drop(columns="deaths")
    frame.to_csv(path, index=False)
    return path


def test_forecast_future_days(tmp_path, capsys):
    """Test forecasting days past the data with no deaths recorded"""
    _train_quick(tmp_path)
    for blank in (False, True):
        horizon = _future_rows(tmp_path / "future.csv", blank_deaths=blank)
        assert _run("forecast", tmp_path, "--horizon", str(horizon)) == 0
        forecast = pd.read_csv(tmp_path / "forecast" / "forecast.csv")
        assert list(forecast["day_index"]) == [62, 63, 64, 65, 66]
        assert forecast["actual"].isna().all()
        assert (forecast["plain"] >= 0).all() and (forecast["adjusted"] >= 0).all()
        summary = read_kv_file(tmp_path / "forecast" / "summary.txt")
        assert summary["mode"] in ("none", "min_adjusted", "max_adjusted")
        assert summary["plain_mse"] == "" and summary["adjusted_mape"] == ""
    assert "plain_mse: \n" in capsys.readouterr().out


def test_adjustment_disabled(tmp_path):
    """Test that without adjustment both forecast columns agree"""
    _train_quick(tmp_path)
    assert _run("forecast", tmp_path, "--set", "adjustment=false") == 0
    forecast = pd.read_csv(tmp_path / "forecast" / "forecast.csv")
    assert list(forecast["plain"]) == list(forecast["adjusted"])
    summary = read_kv_file(tmp_path / "forecast" / "summary.txt")
    assert summary["mode"] == "none"


def test_underestimation_raises_forecasts(tmp_path):
    """Test that a series climbing past the training range lifts the forecasts"""
    _train_quick(tmp_path, "--set", "synth.drift=0.02")
    assert _run("forecast", tmp_path) == 0
    summary = read_kv_file(tmp_path / "forecast" / "summary.txt")
    assert summary["mode"] == "min_adjusted"
    forecast = pd.read_csv(tmp_path / "forecast" / "forecast.csv")
    assert (forecast["adjusted"] >= forecast["plain"]).all()
    assert float(summary["adjusted_mse"]) <= float(summary["plain_mse"])


def test_adjustment_without_validation(tmp_path, capsys):
    """Test that adjustment needs a validation range"""
    _train_quick(tmp_path, "--set", "validation_range=")
    assert _run("forecast", tmp_path, "--set", "validation_range=") == 1
    assert "ERROR EmptyInput:" in capsys.readouterr().err


def test_feature_list_changed_after_training(tmp_path, capsys):
    """Test evaluating with features the models were not trained on"""
    _train_quick(tmp_path)
    assert _run("evaluate", tmp_path, "--set", "features=confirmed,male") == 1
    assert "ERROR ShapeMismatch:" in capsys.readouterr().err


def test_set_before_and_after_command(tmp_path, capsys):
    """Test that --set given on both sides of the command name is merged"""
    args = ["--set", "synth.length=30", "synth", "--set", "synth.seed=3"]
    assert main(args + ["--out", str(tmp_path)]) == 0
    assert "Wrote 30 days" in capsys.readouterr().out
    written = pd.read_csv(tmp_path / "synthetic.csv")
    expected = generate(SyntheticSpec(length=30, seed=3)).to_frame()
    assert written["deaths"].tolist() == expected["deaths"].tolist()


def test_malformed_data_files(tmp_path, capsys):
    """Test that ragged and non-UTF-8 data files are user errors"""
    assert _run("synth", tmp_path) == 0
    data = tmp_path / "synthetic.csv"
    lines = data.read_text(encoding="utf-8").splitlines()

    ragged = lines[:3] + [lines[3] + ",1,2"]
    data.write_text("\n".join(ragged) + "\n", encoding="utf-8")
    assert _run("train", tmp_path) == 1
    assert "ERROR MalformedCsv:" in capsys.readouterr().err

    data.write_bytes(("\n".join(lines[:3]) + "\n").encode("utf-8") + b"3,\xff,1\n")
    assert _run("train", tmp_path) == 1
    assert "ERROR InvalidEncoding:" in capsys.readouterr().err


def test_fixture_non_numeric_cell(tmp_path, capsys):
    """Test a stored forecast that is not a number"""
    path = tmp_path / "stored.csv"
    path.write_text("actual,ann,regression\n4,2,2\n6,x,5\n", encoding="utf-8")
    assert main(["evaluate", "--fixture", str(path), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "ERROR NonNumericCell: row 2, column 'ann'" in err
