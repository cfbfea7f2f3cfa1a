"""
Run stages behind the command line: train, evaluate, forecast, plot data.

Every stage reads its inputs from the run configuration and writes its
outputs below ``RunConfig.out_dir``. Outputs hold no timestamps, so two runs
with the same configuration and data produce byte-identical trees.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from adaptive_forecast import (
    AdjustmentFactors,
    estimate_adjustment,
    forecast_series,
    forecast_values,
    save_adjustment,
)
from config import (
    RunConfig,
    Stage,
    SyntheticSpec,
    format_float,
    format_floats,
    parse_floats,
    read_kv_file,
    run_config_items,
    write_kv_file,
)
from error_handling import (
    EmptyInputError,
    InvalidModelFileError,
    MissingInputError,
    NonNumericCellError,
    TargetInFeaturesError,
)
from evaluation import (
    EvaluationReport,
    compare_report,
    long_horizon_degradation,
    mape,
    mse,
)
from logger import get_logger
from mlp_network import (
    CandidateResult,
    MLPModel,
    candidate_layouts,
    load_mlp_model,
    save_mlp_model,
    select_architecture,
)
from regression_models import (
    RegressionModel,
    expand_polynomial,
    fit_ols,
    load_regression_model,
    save_regression_model,
)
from synthetic import generate
from timeseries_data import (
    Dataset,
    NormalizationParams,
    SplitSpec,
    SupervisedMatrix,
    emit_csv,
    fit_normalizer,
    make_supervised,
    normalize_matrix,
    parse_csv,
    parse_horizon_csv,
    read_text_frame,
    split,
)

logger = get_logger("epiforecast.pipeline")

ANN_LABEL = "ANN"
REGRESSION_LABEL = "Regression"


class RunLayout:
    """File locations inside one output directory"""

    def __init__(self, out_dir):
        self.root = Path(out_dir)

    @property
    def run_config(self) -> Path:
        return self.root / "run_config.cfg"

    @property
    def regression_model(self) -> Path:
        return self.root / "models" / "regression.txt"

    @property
    def mlp_model(self) -> Path:
        return self.root / "models" / "mlp.txt"

    @property
    def normalization(self) -> Path:
        return self.root / "models" / "normalization.txt"

    @property
    def train_dir(self) -> Path:
        return self.root / "train"

    @property
    def evaluation_dir(self) -> Path:
        return self.root / "evaluation"

    @property
    def forecast_table(self) -> Path:
        return self.evaluation_dir / "forecast_table.csv"

    @property
    def forecast_dir(self) -> Path:
        return self.root / "forecast"

    @property
    def plots_dir(self) -> Path:
        return self.root / "plots"


@dataclass(frozen=True)
class TrainedModels:
    regression: RegressionModel
    mlp: MLPModel
    feature_params: NormalizationParams
    target_params: NormalizationParams


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")


def _numeric_column(cells: pd.Series, column: str) -> pd.Series:
    values = pd.to_numeric(cells.str.strip(), errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise NonNumericCellError(
            row + 1, column, cells.iloc[row], expected="a number"
        )
    return values


def _read_frame(path: Path, columns, numeric=()) -> pd.DataFrame:
    """A stored CSV with required columns; `numeric` ones are checked and parsed"""
    if not path.exists():
        raise MissingInputError(f"missing input file: {path}")
    with path.open("rb") as stream:
        frame = read_text_frame(stream, columns)
    for column in numeric:
        frame[column] = _numeric_column(frame[column], column)
    return frame


def load_dataset(path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"data file not found: {path}")
    with path.open("rb") as stream:
        return parse_csv(stream, source_label=str(path))


def load_horizon(path, cfg: RunConfig) -> SupervisedMatrix:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"horizon file not found: {path}")
    with path.open("rb") as stream:
        return parse_horizon_csv(stream, cfg.features, cfg.target, str(path))


def split_spec(cfg: RunConfig) -> SplitSpec:
    return SplitSpec(cfg.train_range, cfg.validation_range, cfg.test_range)


def regression_design(ds: Dataset, cfg: RunConfig) -> SupervisedMatrix:
    """Multivariate features, or powers of one variable when degree > 1"""
    if cfg.regression_degree == 1:
        return make_supervised(ds, cfg.features, cfg.target)
    if cfg.poly_variable == cfg.target:
        raise TargetInFeaturesError(
            f"polynomial variable {cfg.poly_variable!r} is the target"
        )
    return expand_polynomial(
        ds.column(cfg.poly_variable),
        cfg.regression_degree,
        y=ds.column(cfg.target),
        name=cfg.poly_variable,
        days=ds.column("day_index"),
    )


def network_design(ds: Dataset, cfg: RunConfig) -> SupervisedMatrix:
    return make_supervised(ds, cfg.features, cfg.target)


def save_normalization(
    feature_params: NormalizationParams, target_params: NormalizationParams, path
) -> None:
    write_kv_file(
        path,
        {
            "feature_names": ",".join(feature_params.feature_names),
            "feature_min": format_floats(feature_params.mins),
            "feature_max": format_floats(feature_params.maxs),
            "target_name": target_params.feature_names[0],
            "target_min": format_float(target_params.mins[0]),
            "target_max": format_float(target_params.maxs[0]),
        },
    )


def load_normalization(path) -> Tuple[NormalizationParams, NormalizationParams]:
    values = read_kv_file(path)
    try:
        features = NormalizationParams(
            parse_floats(values["feature_min"]),
            parse_floats(values["feature_max"]),
            tuple(values["feature_names"].split(",")),
        )
        target = NormalizationParams(
            [float(values["target_min"])],
            [float(values["target_max"])],
            (values["target_name"],),
        )
    except (KeyError, ValueError) as e:
        raise InvalidModelFileError(f"{path}: {e}") from None
    return features, target


def load_models(layout: RunLayout) -> TrainedModels:
    feature_params, target_params = load_normalization(layout.normalization)
    return TrainedModels(
        regression=load_regression_model(layout.regression_model),
        mlp=load_mlp_model(layout.mlp_model),
        feature_params=feature_params,
        target_params=target_params,
    )


def write_synthetic(spec: SyntheticSpec, path) -> Dataset:
    ds = generate(spec)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        emit_csv(ds, stream)
    logger.info("Wrote %s", path)
    return ds


def _layer_label(sizes) -> str:
    return "layers_" + "-".join(str(s) for s in sizes)


def train_models(cfg: RunConfig) -> Tuple[TrainedModels, List[CandidateResult]]:
    """Fit the regression baseline and select a network on the train split"""
    layout = RunLayout(cfg.out_dir)
    ds = load_dataset(cfg.data_path)
    train_ds, validation_ds, _ = split(ds, split_spec(cfg))

    regression = fit_ols(regression_design(train_ds, cfg), ridge=cfg.ridge)
    logger.info("Regression fitted on %d days, rss %.6g", len(train_ds), regression.rss)

    train_matrix = network_design(train_ds, cfg)
    feature_params = fit_normalizer(train_matrix)
    target_params = fit_normalizer(train_matrix.y, (cfg.target,))
    train_norm = normalize_matrix(train_matrix, feature_params, target_params)
    validation_norm = None
    if validation_ds is not None:
        validation_norm = normalize_matrix(
            network_design(validation_ds, cfg), feature_params, target_params
        )

    candidates = candidate_layouts(train_matrix.n_features, cfg.hidden_candidates)
    mlp, results = select_architecture(
        candidates,
        train_norm,
        validation_norm,
        cfg.mlp_config(candidates[0]),
        workers=cfg.workers,
    )

    write_kv_file(layout.run_config, run_config_items(cfg))
    save_regression_model(regression, layout.regression_model)
    save_mlp_model(mlp, layout.mlp_model)
    save_normalization(feature_params, target_params, layout.normalization)

    epochs = np.arange(1, cfg.max_epochs + 1)
    trace: Dict[str, object] = {"epoch": epochs}
    for result in results:
        trace[_layer_label(result.layer_sizes)] = result.report.train_mse_per_epoch
    _write_frame(pd.DataFrame(trace), layout.train_dir / "epoch_mse.csv")

    selection = pd.DataFrame(
        [
            {
                "layers": "-".join(str(s) for s in r.layer_sizes),
                "n_weights": r.n_weights,
                "final_train_mse": r.report.final_train_mse,
                "validation_mse": r.report.final_validation_mse,
                "selected": r.selected,
            }
            for r in results
        ]
    )
    _write_frame(selection, layout.train_dir / "selection_log.csv")

    chosen = next(r for r in results if r.selected)
    validation_mse = chosen.report.final_validation_mse
    write_kv_file(
        layout.train_dir / "train_report.txt",
        {
            "selected_layers": "-".join(str(s) for s in chosen.layer_sizes),
            "epochs_run": chosen.report.epochs_run,
            "learning_rate": format_float(cfg.learning_rate),
            "final_train_mse": format_float(chosen.report.final_train_mse),
            "final_validation_mse": (
                "" if validation_mse is None else format_float(validation_mse)
            ),
            "regression_features": ",".join(regression.feature_names),
            "regression_rss": format_float(regression.rss),
        },
    )
    logger.info("Wrote models and training traces to %s", layout.root)
    models = TrainedModels(regression, mlp, feature_params, target_params)
    return models, results


def _stage_parts(cfg: RunConfig, ds: Dataset):
    train_ds, validation_ds, test_ds = split(ds, split_spec(cfg))
    parts = [
        (Stage.FITTING, train_ds),
        (Stage.VALIDATION, validation_ds),
        (Stage.TEST, test_ds),
    ]
    return [(stage, part) for stage, part in parts if part is not None]


def evaluate_models(cfg: RunConfig) -> EvaluationReport:
    """Score both models on every available stage and write the comparison"""
    layout = RunLayout(cfg.out_dir)
    models = load_models(layout)
    ds = load_dataset(cfg.data_path)

    entries = []
    table = []
    for stage, part in _stage_parts(cfg, ds):
        actual = part.column(cfg.target)
        ann = forecast_series(
            models.mlp,
            network_design(part, cfg),
            models.target_params,
            None,
            models.feature_params,
        )
        regression = forecast_series(models.regression, regression_design(part, cfg))
        entries.append((REGRESSION_LABEL, stage.value, actual, regression))
        entries.append((ANN_LABEL, stage.value, actual, ann))
        days = part.column("day_index")
        for day, a, f_ann, f_reg in zip(days, actual, ann, regression):
            table.append(
                {
                    "stage": stage.value,
                    "day_index": int(day),
                    "actual": int(a),
                    "ann": int(f_ann),
                    "regression": int(f_reg),
                }
            )

    report = compare_report(entries)
    write_report(report, layout.evaluation_dir)
    _write_frame(pd.DataFrame(table), layout.forecast_table)

    summary = {}
    for label in (REGRESSION_LABEL, ANN_LABEL):
        degraded = long_horizon_degradation(report, label)
        if degraded is not None:
            summary[f"{label.lower()}_long_horizon_degradation"] = str(degraded).lower()
    if summary:
        write_kv_file(layout.evaluation_dir / "summary.txt", summary)
    return report


def write_report(report: EvaluationReport, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "report.csv").open("w", encoding="utf-8", newline="") as stream:
        report.to_csv(stream)
    (directory / "report.md").write_text(report.to_markdown(), encoding="utf-8")
    logger.info("Wrote evaluation report to %s", directory)


def evaluate_fixture(path, out_dir) -> EvaluationReport:
    """Replay stored actual/ann/regression columns as a validation comparison"""
    columns = ("actual", "ann", "regression")
    frame = _read_frame(Path(path), columns, numeric=columns)
    report = compare_report(
        [
            (
                REGRESSION_LABEL,
                Stage.VALIDATION.value,
                frame["actual"],
                frame["regression"],
            ),
            (ANN_LABEL, Stage.VALIDATION.value, frame["actual"], frame["ann"]),
        ]
    )
    write_report(report, RunLayout(out_dir).evaluation_dir)
    return report


def _forecast_summary(
    factors: AdjustmentFactors, actual, plain, adjusted
) -> Dict[str, str]:
    """Mode plus plain and adjusted scores, blank when actuals are unknown"""
    summary = {"mode": factors.mode.value}
    for label, values in (("plain", plain), ("adjusted", adjusted)):
        known = actual is not None
        summary[f"{label}_mse"] = format_float(mse(actual, values)) if known else ""
        summary[f"{label}_mape"] = format_float(mape(actual, values)) if known else ""
    return summary


def forecast_horizon(
    cfg: RunConfig, horizon_path: Optional[str] = None
) -> Tuple[AdjustmentFactors, pd.DataFrame, Dict[str, str]]:
    """Plain and adjusted network forecasts over the horizon rows"""
    layout = RunLayout(cfg.out_dir)
    models = load_models(layout)
    ds = load_dataset(cfg.data_path)
    _, validation_ds, test_ds = split(ds, split_spec(cfg))

    if cfg.adjustment:
        if validation_ds is None:
            raise EmptyInputError(
                "adjustment needs a validation split to estimate factors"
            )
        plain_validation = forecast_values(
            models.mlp,
            network_design(validation_ds, cfg),
            models.target_params,
            None,
            models.feature_params,
        )
        factors = estimate_adjustment(
            validation_ds.column(cfg.target), plain_validation, models.target_params
        )
    else:
        factors = AdjustmentFactors.none(models.target_params)

    if horizon_path is not None:
        X = load_horizon(horizon_path, cfg)
    else:
        horizon = test_ds if test_ds is not None else validation_ds
        if horizon is None:
            raise EmptyInputError("no horizon rows: set a test or validation range")
        X = network_design(horizon, cfg)

    plain = forecast_series(
        models.mlp, X, models.target_params, None, models.feature_params
    )
    adjusted = forecast_series(
        models.mlp, X, models.target_params, factors, models.feature_params
    )
    actual = X.y
    table = pd.DataFrame(
        {
            "day_index": X.days,
            "actual": [None] * X.n_rows if actual is None else actual.astype(int),
            "plain": plain,
            "adjusted": adjusted,
        }
    )
    _write_frame(table, layout.forecast_dir / "forecast.csv")
    save_adjustment(factors, layout.forecast_dir / "adjustment.txt")
    summary = _forecast_summary(factors, actual, plain, adjusted)
    write_kv_file(layout.forecast_dir / "summary.txt", summary)
    logger.info("Wrote %d forecast rows to %s", len(table), layout.forecast_dir)
    return factors, table, summary


def rescore_fixture(path, out_dir) -> Dict[str, str]:
    """Score stored actual/plain/adjusted columns (the adjustment table shape)"""
    columns = ("actual", "plain", "adjusted")
    frame = _read_frame(Path(path), columns, numeric=columns)
    summary = {
        "plain_mse": format_float(mse(frame["actual"], frame["plain"])),
        "plain_mape": format_float(mape(frame["actual"], frame["plain"])),
        "adjusted_mse": format_float(mse(frame["actual"], frame["adjusted"])),
        "adjusted_mape": format_float(mape(frame["actual"], frame["adjusted"])),
    }
    write_kv_file(RunLayout(out_dir).forecast_dir / "summary.txt", summary)
    return summary


def write_plot_data(cfg: RunConfig) -> Dict[str, Path]:
    """Point files behind the case/death, curve-fit and comparison figures"""
    layout = RunLayout(cfg.out_dir)
    ds = load_dataset(cfg.data_path)
    numeric = ("day_index", "actual", "ann", "regression")
    table = _read_frame(layout.forecast_table, ("stage",) + numeric, numeric)

    cases_deaths = pd.DataFrame(
        {
            "day": ds.column("day_index").astype(int),
            "confirmed": ds.column("confirmed").astype(int),
            "deaths": ds.column("deaths").astype(int),
        }
    )
    fitting = table[table["stage"] == Stage.FITTING.value]
    network_fit = pd.DataFrame(
        {
            "day": fitting["day_index"],
            "actual": fitting["actual"],
            "ann_fit": fitting["ann"],
        }
    )
    later = table[table["stage"] != Stage.FITTING.value]
    held_out = pd.DataFrame(
        {
            "day": later["day_index"],
            "actual": later["actual"],
            "ann": later["ann"],
            "regression": later["regression"],
        }
    )

    paths = {}
    for name, frame in (
        ("cases_deaths", cases_deaths),
        ("network_fit", network_fit),
        ("heldout_forecasts", held_out),
    ):
        paths[name] = layout.plots_dir / f"{name}.csv"
        _write_frame(frame, paths[name])
    logger.info("Wrote plot point files to %s", layout.plots_dir)
    return paths
