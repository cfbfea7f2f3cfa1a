"""
Daily hospital time series: ingestion, splitting and min-max normalization
"""

import datetime
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import (
    COLUMNS,
    COUNT_COLUMNS,
    DEFAULT_FEATURES,
    DEFAULT_TARGET,
    DEFAULT_TEST_RANGE,
    DEFAULT_TRAIN_RANGE,
    DEFAULT_VALIDATION_RANGE,
    NUMERIC_COLUMNS,
    Range,
)
from error_handling import (
    ConstantFeatureError,
    DeathsExceedConfirmedError,
    EmptyFeaturesError,
    EmptyInputError,
    EmptyTrainError,
    InvalidDateError,
    InvalidEncodingError,
    MalformedCsvError,
    MissingColumnError,
    NegativeCountError,
    NonContiguousDaysError,
    NonNumericCellError,
    RangeOutOfBoundsError,
    RangeOverlapError,
    ShapeMismatchError,
    TargetInFeaturesError,
    TooFewRowsError,
    UnknownColumnError,
)
from logger import get_logger

logger = get_logger("epiforecast.data")


@dataclass(frozen=True)
class TimeSeriesRecord:
    """One hospital-day observation"""

    day_index: int
    date: datetime.date
    confirmed: int
    deaths: int
    male: int
    female: int
    under_45: int
    over_45: int
    comorbid: int

    def __post_init__(self):
        for name in COUNT_COLUMNS:
            value = getattr(self, name)
            if value < 0:
                raise NegativeCountError(self.day_index, name, value)
        if self.deaths > self.confirmed:
            raise DeathsExceedConfirmedError(
                f"day {self.day_index}: deaths {self.deaths} exceed "
                f"confirmed {self.confirmed}"
            )

    def value(self, column: str) -> int:
        if column not in NUMERIC_COLUMNS:
            raise UnknownColumnError(f"unknown column {column!r}")
        return getattr(self, column)


@dataclass(frozen=True)
class Dataset:
    """Ordered daily records with contiguous day_index values"""

    records: Tuple[TimeSeriesRecord, ...]
    source_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise EmptyInputError("dataset has no records")
        first = self.records[0].day_index
        for offset, record in enumerate(self.records):
            if record.day_index != first + offset:
                raise NonContiguousDaysError(
                    f"day_index {record.day_index} at position {offset + 1}, "
                    f"expected {first + offset}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def first_day(self) -> int:
        return self.records[0].day_index

    @property
    def last_day(self) -> int:
        return self.records[-1].day_index

    def column(self, name: str) -> np.ndarray:
        """One numeric column as a float vector"""
        if name not in NUMERIC_COLUMNS:
            raise UnknownColumnError(f"unknown column {name!r}")
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {name: [getattr(r, name) for r in self.records] for name in COLUMNS}
        )
        frame["date"] = [r.date.isoformat() for r in self.records]
        return frame


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive 1-based day ranges for the three chronological stages"""

    train: Range = DEFAULT_TRAIN_RANGE
    validation: Optional[Range] = DEFAULT_VALIDATION_RANGE
    test: Optional[Range] = DEFAULT_TEST_RANGE

    def ranges(self):
        return [
            (name, r)
            for name, r in (
                ("train", self.train),
                ("validation", self.validation),
                ("test", self.test),
            )
            if r is not None
        ]

    def validate(self, n_rows: int) -> None:
        lo, hi = self.train
        if hi < lo:
            raise EmptyTrainError(f"train range {lo}-{hi} is empty")
        present = self.ranges()
        for name, (lo, hi) in present:
            if hi < lo:
                raise RangeOutOfBoundsError(f"{name} range {lo}-{hi} is reversed")
        for (prev_name, prev), (name, cur) in zip(present, present[1:]):
            if cur[0] <= prev[1]:
                raise RangeOverlapError(
                    f"{name} range {cur[0]}-{cur[1]} overlaps or precedes "
                    f"{prev_name} range {prev[0]}-{prev[1]}"
                )
        for name, (lo, hi) in present:
            if lo < 1 or hi > n_rows:
                raise RangeOutOfBoundsError(
                    f"{name} range {lo}-{hi} outside dataset days 1-{n_rows}"
                )


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    """Per-feature min-max bounds, computed on the training portion"""

    mins: np.ndarray
    maxs: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        mins = np.atleast_1d(np.array(self.mins, dtype=float))
        maxs = np.atleast_1d(np.array(self.maxs, dtype=float))
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ShapeMismatchError("mins and maxs must be equal-length vectors")
        if np.any(maxs < mins):
            raise ConstantFeatureError("max must be >= min for every feature")
        mins.setflags(write=False)
        maxs.setflags(write=False)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(len(mins)))
        if len(names) != len(mins):
            raise ShapeMismatchError("one feature name per bound required")
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return len(self.mins)

    @property
    def span(self) -> np.ndarray:
        return self.maxs - self.mins

    def require_spread(self) -> None:
        flat = [n for n, s in zip(self.feature_names, self.span) if not s > 0]
        if flat:
            raise ConstantFeatureError(f"constant feature(s): {', '.join(flat)}")


@dataclass(frozen=True, eq=False)
class SupervisedMatrix:
    """Explanatory rows X with the response y (absent for unknown actuals)"""

    X: np.ndarray
    y: Optional[np.ndarray]
    feature_names: Tuple[str, ...]
    target_name: str = DEFAULT_TARGET
    days: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] < 1:
            raise EmptyFeaturesError("a supervised matrix needs at least one feature")
        names = tuple(self.feature_names)
        if len(names) != X.shape[1]:
            raise ShapeMismatchError(
                f"{X.shape[1]} feature columns but {len(names)} feature names"
            )
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)
        if self.y is not None:
            y = np.array(self.y, dtype=float).reshape(-1)
            if len(y) != X.shape[0]:
                raise ShapeMismatchError(f"{X.shape[0]} rows in X but {len(y)} targets")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)
        if self.days is not None:
            days = np.array(self.days, dtype=int).reshape(-1)
            days.setflags(write=False)
            object.__setattr__(self, "days", days)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def _parse_count(raw: str, row: int, column: str) -> int:
    text = raw.strip()
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(row, column, raw) from None
    if not np.isfinite(value) or value != int(value):
        raise NonNumericCellError(row, column, raw)
    value = int(value)
    if value < 0:
        raise NegativeCountError(row, column, value)
    return value


def _parse_date(raw: str, row: int) -> datetime.date:
    try:
        return datetime.date.fromisoformat(raw.strip())
    except ValueError:
        raise InvalidDateError(f"row {row}: date {raw!r} is not YYYY-MM-DD") from None


def read_text_frame(
    stream: Union[str, IO], required: Sequence[str] = ()
) -> pd.DataFrame:
    """Every cell as text; malformed or non-UTF-8 input is a data error"""
    try:
        frame = pd.read_csv(
            stream,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        raise EmptyInputError("CSV stream is empty") from None
    except pd.errors.ParserError as e:
        raise MalformedCsvError(str(e).strip()) from None
    except UnicodeDecodeError as e:
        raise InvalidEncodingError(f"not UTF-8 at byte {e.start}") from None
    # Short rows come back as NaN
    frame = frame.fillna("")
    frame.columns = [str(c).strip() for c in frame.columns]
    for column in required:
        if column not in frame.columns:
            raise MissingColumnError(column)
    if frame.empty:
        raise EmptyInputError("CSV has a header but no data rows")
    return frame


def parse_csv(stream: Union[str, IO], source_label: str = "") -> Dataset:
    """Read the nine-column hospital CSV (any column order, LF or CRLF)"""
    frame = read_text_frame(stream, COLUMNS)

    records = []
    for position, cells in enumerate(frame.to_dict("records"), start=1):
        counts = {c: _parse_count(cells[c], position, c) for c in NUMERIC_COLUMNS}
        if counts["day_index"] != position:
            raise NonContiguousDaysError(
                f"row {position}: day_index {counts['day_index']}, expected {position}"
            )
        records.append(
            TimeSeriesRecord(date=_parse_date(cells["date"], position), **counts)
        )

    ds = Dataset(tuple(records), source_label=source_label)
    _soft_checks(ds)
    logger.info("Loaded %d daily records from %s", len(ds), source_label or "stream")
    return ds


def _soft_checks(ds: Dataset) -> None:
    confirmed = ds.column("confirmed")
    for left, right in (("male", "female"), ("under_45", "over_45")):
        mismatched = int(np.sum(ds.column(left) + ds.column(right) != confirmed))
        if mismatched:
            logger.warning(
                "%s+%s != confirmed on %d of %d days", left, right, mismatched, len(ds)
            )


def emit_csv(ds: Dataset, stream: Union[str, IO]) -> None:
    """Write a dataset in the ingestion schema"""
    ds.to_frame().to_csv(stream, index=False, lineterminator="\n")


def split(
    ds: Dataset, spec: SplitSpec
) -> Tuple[Dataset, Optional[Dataset], Optional[Dataset]]:
    """Cut the series into train, validation and test datasets"""
    spec.validate(len(ds))

    def cut(r: Optional[Range]) -> Optional[Dataset]:
        if r is None:
            return None
        lo, hi = r
        return Dataset(ds.records[lo - 1 : hi], source_label=ds.source_label)

    return cut(spec.train), cut(spec.validation), cut(spec.test)


def fit_normalizer(
    data: Union[SupervisedMatrix, Sequence[float], np.ndarray],
    feature_names: Sequence[str] = (),
) -> NormalizationParams:
    """Column extrema of a feature matrix or a single target vector"""
    if isinstance(data, SupervisedMatrix):
        values = data.X
        feature_names = data.feature_names
    else:
        values = np.asarray(data, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
    if values.shape[0] < 2:
        raise TooFewRowsError("normalization bounds need at least 2 rows")
    params = NormalizationParams(
        values.min(axis=0), values.max(axis=0), tuple(feature_names)
    )
    params.require_spread()
    return params


def _scalar_or_array(given, result: np.ndarray, p: NormalizationParams):
    if np.ndim(given) == 0 and p.n_features == 1:
        return float(result.reshape(-1)[0])
    return result


def normalize(v, p: NormalizationParams):
    """(v - min) / (max - min), clipped to [0, 1]"""
    p.require_spread()
    u = np.clip((np.asarray(v, dtype=float) - p.mins) / p.span, 0.0, 1.0)
    return _scalar_or_array(v, u, p)


def clip_count(v, p: NormalizationParams) -> int:
    """How many values normalize() would clip"""
    arr = np.asarray(v, dtype=float)
    return int(np.sum((arr < p.mins) | (arr > p.maxs)))


def denormalize(u, p: NormalizationParams):
    """u * (max - min) + min"""
    p.require_spread()
    v = np.asarray(u, dtype=float) * p.span + p.mins
    return _scalar_or_array(u, v, p)


def make_supervised(
    ds: Dataset,
    features: Sequence[str] = DEFAULT_FEATURES,
    target: str = DEFAULT_TARGET,
) -> SupervisedMatrix:
    """Feature columns in the requested order against one target column"""
    features = tuple(features)
    if not features:
        raise EmptyFeaturesError("feature list is empty")
    for name in features + (target,):
        if name not in NUMERIC_COLUMNS:
            raise UnknownColumnError(f"unknown column {name!r}")
    if target in features:
        raise TargetInFeaturesError(f"target {target!r} is also a feature")
    X = np.column_stack([ds.column(name) for name in features])
    return SupervisedMatrix(
        X=X,
        y=ds.column(target),
        feature_names=features,
        target_name=target,
        days=ds.column("day_index"),
    )


def normalize_matrix(
    m: SupervisedMatrix,
    feature_params: NormalizationParams,
    target_params: Optional[NormalizationParams] = None,
) -> SupervisedMatrix:
    """Map a matrix into [0, 1] with training bounds, logging clipped values"""
    if feature_params.n_features != m.n_features:
        raise ShapeMismatchError(
            f"normalizer has {feature_params.n_features} features, "
            f"matrix has {m.n_features}"
        )
    clipped = clip_count(m.X, feature_params)
    y = None
    if m.y is not None and target_params is not None:
        clipped += clip_count(m.y, target_params)
        y = normalize(m.y, target_params)
    if clipped:
        logger.warning("Clipped %d value(s) outside the training range", clipped)
    return SupervisedMatrix(
        X=normalize(m.X, feature_params),
        y=y,
        feature_names=m.feature_names,
        target_name=m.target_name,
        days=m.days,
    )


def parse_horizon_csv(
    stream: Union[str, IO],
    features: Sequence[str] = DEFAULT_FEATURES,
    target: str = DEFAULT_TARGET,
    source_label: str = "",
) -> SupervisedMatrix:
    """Rows to forecast: contiguous days from any start, target optional.

    The target column may be absent or left blank on every row; the matrix
    then carries ``y=None``. Partly filled targets are rejected.
    """
    features = tuple(features)
    if target in features:
        raise TargetInFeaturesError(f"target {target!r} is also a feature")
    frame = read_text_frame(stream, ("day_index",) + features)
    rows = list(enumerate(frame.to_dict("records"), start=1))

    days = [_parse_count(cells["day_index"], n, "day_index") for n, cells in rows]
    for offset, day in enumerate(days):
        if day < 1 or day != days[0] + offset:
            raise NonContiguousDaysError(
                f"row {offset + 1}: day_index {day}, expected {days[0] + offset}"
            )
    X = [[_parse_count(cells[c], n, c) for c in features] for n, cells in rows]

    y = None
    if target in frame.columns and any(str(c).strip() for c in frame[target]):
        y = [_parse_count(cells[target], n, target) for n, cells in rows]
    logger.info(
        "Loaded %d horizon rows (days %d-%d) from %s, actuals %s",
        len(days),
        days[0],
        days[-1],
        source_label or "stream",
        "known" if y is not None else "unknown",
    )
    return SupervisedMatrix(
        X=np.array(X, dtype=float),
        y=None if y is None else np.array(y, dtype=float),
        feature_names=features,
        target_name=target,
        days=np.array(days, dtype=int),
    )
