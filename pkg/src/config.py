"""
Configuration and constants for epiforecast
"""

import datetime
from dataclasses import dataclass, asdict, fields, replace
from enum import Enum
from numbers import Integral
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

from error_handling import InvalidConfigError, MissingInputError

# Ingestion schema
COLUMNS = (
    "day_index",
    "date",
    "confirmed",
    "deaths",
    "male",
    "female",
    "under_45",
    "over_45",
    "comorbid",
)
COUNT_COLUMNS = COLUMNS[2:]
NUMERIC_COLUMNS = ("day_index",) + COUNT_COLUMNS

DEFAULT_FEATURES = ("confirmed", "male", "female", "under_45", "over_45", "comorbid")
DEFAULT_TARGET = "deaths"

# Default split (1-based inclusive day ranges)
DEFAULT_TRAIN_RANGE = (1, 46)
DEFAULT_VALIDATION_RANGE = (47, 56)
DEFAULT_TEST_RANGE = (57, 61)

# Network training
DEFAULT_LEARNING_RATE = 0.3
DEFAULT_MAX_EPOCHS = 1000
DEFAULT_HIDDEN_CANDIDATES = ((4,), (8,), (12,))
DEFAULT_INIT_LOW = 0.0
DEFAULT_INIT_HIGH = 1.0
DEFAULT_SEED = 42
EPOCH_LOG_INTERVAL = 100

# Adjustment factors
ADJUSTMENT_TOL = 1e-9
ADJUSTMENT_CLAMP = 0.9

# Gradient checking
GRAD_CHECK_EPSILON = 1e-5
GRAD_CHECK_FLOOR = 1e-6

# Reporting
DISPLAY_DECIMALS = 3
REPORT_COLUMNS = ("model", "stage", "mse", "mape", "n", "skipped")

# Exit codes
EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2


class AdjustmentMode(Enum):
    NONE = "none"
    MAX_ADJUSTED = "max_adjusted"
    MIN_ADJUSTED = "min_adjusted"
    BOTH_ADJUSTED = "both_adjusted"


class Stage(Enum):
    FITTING = "fitting"
    VALIDATION = "validation"
    TEST = "test"


Range = Tuple[int, int]


@dataclass(frozen=True)
class MLPConfig:
    """Network topology and batch backpropagation settings"""

    layer_sizes: Tuple[int, ...] = (len(DEFAULT_FEATURES), 8, 1)
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    seed: int = DEFAULT_SEED
    init_low: float = DEFAULT_INIT_LOW
    init_high: float = DEFAULT_INIT_HIGH

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise InvalidConfigError("layer_sizes needs at least 2 layers")
        if any(size < 1 for size in self.layer_sizes):
            raise InvalidConfigError(
                f"layer sizes must be positive: {self.layer_sizes}"
            )
        if self.layer_sizes[-1] != 1:
            raise InvalidConfigError("output layer must have exactly 1 node")
        if not self.learning_rate > 0:
            raise InvalidConfigError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.max_epochs < 1:
            raise InvalidConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.init_low < self.init_high:
            raise InvalidConfigError(
                f"init_low must be < init_high, got [{self.init_low}, {self.init_high})"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the seeded synthetic hospital series"""

    length: int = 61
    start_date: str = "2020-05-28"
    base_deaths: float = 3.0
    trend: float = 0.1
    drift: float = 0.0
    amplitude: float = 1.5
    period: float = 14.0
    noise: float = 1.0
    cases_per_death: int = 5
    baseline_cases: int = 10
    coverage: float = 0.9
    male_share: float = 0.55
    under_45_share: float = 0.4
    comorbid_share: float = 0.3
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.length < 3:
            raise InvalidConfigError(
                f"synthetic length must be >= 3, got {self.length}"
            )
        if self.noise < 0:
            raise InvalidConfigError("synthetic noise amplitude must be >= 0")
        if self.period <= 0:
            raise InvalidConfigError("synthetic period must be > 0")
        try:
            datetime.date.fromisoformat(self.start_date)
        except ValueError:
            raise InvalidConfigError(
                f"synth.start_date must be YYYY-MM-DD, got {self.start_date!r}"
            ) from None
        if self.cases_per_death < 1 or self.baseline_cases < 0:
            raise InvalidConfigError(
                "cases_per_death >= 1 and baseline_cases >= 0 required"
            )
        for name in ("coverage", "male_share", "under_45_share", "comorbid_share"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfigError(
                    f"synth.{name} must lie in [0, 1], got {value}"
                )


@dataclass(frozen=True)
class RunConfig:
    """Settings for one reproducible forecasting run"""

    data_path: str = "runs/synthetic.csv"
    train_range: Range = DEFAULT_TRAIN_RANGE
    validation_range: Optional[Range] = DEFAULT_VALIDATION_RANGE
    test_range: Optional[Range] = DEFAULT_TEST_RANGE
    features: Tuple[str, ...] = DEFAULT_FEATURES
    target: str = DEFAULT_TARGET
    regression_degree: int = 1
    poly_variable: str = "confirmed"
    ridge: float = 0.0
    hidden_candidates: Tuple[Tuple[int, ...], ...] = DEFAULT_HIDDEN_CANDIDATES
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    seed: int = DEFAULT_SEED
    init_low: float = DEFAULT_INIT_LOW
    init_high: float = DEFAULT_INIT_HIGH
    adjustment: bool = True
    workers: int = 1
    out_dir: str = "runs/latest"

    def __post_init__(self):
        names = set(NUMERIC_COLUMNS)
        for column in tuple(self.features) + (self.target, self.poly_variable):
            if column not in names:
                raise InvalidConfigError(f"unknown column in config: {column!r}")
        if self.max_epochs < 1:
            raise InvalidConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.regression_degree < 1:
            raise InvalidConfigError("regression_degree must be >= 1")
        if self.ridge < 0:
            raise InvalidConfigError("ridge must be >= 0")
        layouts = tuple(
            (int(h),) if isinstance(h, Integral) else tuple(int(s) for s in h)
            for h in self.hidden_candidates
        )
        if not layouts:
            raise InvalidConfigError("hidden_candidates must not be empty")
        for hidden in layouts:
            if not hidden or any(size < 1 for size in hidden):
                raise InvalidConfigError(f"bad hidden layout: {hidden}")
        object.__setattr__(self, "hidden_candidates", layouts)
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")

    def mlp_config(self, layer_sizes: Tuple[int, ...]) -> MLPConfig:
        """Network settings for one candidate topology"""
        return MLPConfig(
            layer_sizes=layer_sizes,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            seed=self.seed,
            init_low=self.init_low,
            init_high=self.init_high,
        )


# Key-value text format


def format_float(value: float) -> str:
    """Shortest text that reads back to the same float"""
    return repr(float(value))


def format_floats(values: Iterable[float]) -> str:
    return ",".join(format_float(v) for v in values)


def parse_floats(text: str) -> Tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


def read_kv_file(path) -> Dict[str, str]:
    """Read a flat `key = value` file; '#' starts a comment line"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingInputError(f"file not found: {path}") from None
    return parse_kv_text(text, source=str(path))


def parse_kv_text(text: str, source: str = "<text>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def write_kv_file(path, items: Dict[str, Any], header: Optional[str] = None) -> None:
    """Write a flat `key = value` file, keys in insertion order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if header:
        lines.append(f"# {header}")
    for key, value in items.items():
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_range(text: str) -> Optional[Range]:
    text = text.strip()
    if not text or text.lower() == "none":
        return None
    lo, sep, hi = text.partition("-")
    if not sep:
        raise InvalidConfigError(f"range must look like 'lo-hi', got {text!r}")
    return int(lo), int(hi)


def _format_range(value: Optional[Range]) -> str:
    return "" if value is None else f"{value[0]}-{value[1]}"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise InvalidConfigError(f"expected a boolean, got {text!r}")


def _parse_names(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_layouts(text: str) -> Tuple[Tuple[int, ...], ...]:
    """`4,8,12` or `4;8;8-4`: hidden sizes per candidate, `-` between layers"""
    separator = ";" if ";" in text else ","
    items = [part.strip() for part in text.split(separator) if part.strip()]
    return tuple(tuple(int(size) for size in item.split("-")) for item in items)


def _format_layouts(layouts) -> str:
    return ";".join("-".join(str(size) for size in hidden) for hidden in layouts)


_RUN_PARSERS: Dict[str, Callable[[str], Any]] = {
    "data_path": str,
    "train_range": _parse_range,
    "validation_range": _parse_range,
    "test_range": _parse_range,
    "features": _parse_names,
    "target": str,
    "regression_degree": int,
    "poly_variable": str,
    "ridge": float,
    "hidden_candidates": _parse_layouts,
    "learning_rate": float,
    "max_epochs": int,
    "seed": int,
    "init_low": float,
    "init_high": float,
    "adjustment": _parse_bool,
    "workers": int,
    "out_dir": str,
}

_SYNTH_PARSERS: Dict[str, Callable[[str], Any]] = {
    "length": int,
    "start_date": str,
    "base_deaths": float,
    "trend": float,
    "drift": float,
    "amplitude": float,
    "period": float,
    "noise": float,
    "cases_per_death": int,
    "baseline_cases": int,
    "coverage": float,
    "male_share": float,
    "under_45_share": float,
    "comorbid_share": float,
    "seed": int,
}

SYNTH_PREFIX = "synth."


def _convert(parsers: Dict[str, Callable[[str], Any]], key: str, text: str) -> Any:
    try:
        return parsers[key](text)
    except (TypeError, ValueError) as e:
        raise InvalidConfigError(f"bad value for {key!r}: {text!r} ({e})") from None


def split_overrides(values: Dict[str, str]) -> Tuple[Dict[str, str], Dict[str, str]]:
    """Separate run keys from `synth.`-prefixed generator keys"""
    run, synth = {}, {}
    for key, text in values.items():
        if key.startswith(SYNTH_PREFIX):
            name = key[len(SYNTH_PREFIX):]
            if name not in _SYNTH_PARSERS:
                raise InvalidConfigError(f"unknown config key: {key!r}")
            synth[name] = text
        elif key in _RUN_PARSERS:
            run[key] = text
        else:
            raise InvalidConfigError(f"unknown config key: {key!r}")
    return run, synth


def build_configs(
    values: Dict[str, str], base: Optional[RunConfig] = None
) -> Tuple[RunConfig, SyntheticSpec]:
    """Turn raw key-value text into validated run and generator settings"""
    run_text, synth_text = split_overrides(values)
    run_changes = {k: _convert(_RUN_PARSERS, k, v) for k, v in run_text.items()}
    synth_changes = {k: _convert(_SYNTH_PARSERS, k, v) for k, v in synth_text.items()}
    try:
        run = replace(base or RunConfig(), **run_changes)
        synth = SyntheticSpec(**synth_changes)
    except (TypeError, ValueError) as e:
        raise InvalidConfigError(str(e)) from None
    return run, synth


def load_configs(path=None, overrides: Optional[Dict[str, str]] = None):
    """Defaults, then the config file, then explicit overrides"""
    values: Dict[str, str] = {}
    if path is not None:
        values.update(read_kv_file(path))
    if overrides:
        values.update(overrides)
    return build_configs(values)


def run_config_items(
    run: RunConfig, synth: Optional[SyntheticSpec] = None
) -> Dict[str, str]:
    """Serialize settings back into the config file format"""
    items: Dict[str, str] = {}
    for f in fields(run):
        value = getattr(run, f.name)
        if f.name.endswith("_range"):
            items[f.name] = _format_range(value)
        elif f.name == "hidden_candidates":
            items[f.name] = _format_layouts(value)
        elif f.name == "features":
            items[f.name] = ",".join(value)
        elif isinstance(value, bool):
            items[f.name] = "true" if value else "false"
        elif isinstance(value, float):
            items[f.name] = format_float(value)
        else:
            items[f.name] = str(value)
    if synth is not None:
        for key, value in asdict(synth).items():
            text = format_float(value) if isinstance(value, float) else str(value)
            items[SYNTH_PREFIX + key] = text
    return items
