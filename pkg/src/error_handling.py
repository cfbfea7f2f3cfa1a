"""
Error handling utilities for epiforecast
"""

import sys
import traceback

from logger import get_logger

logger = get_logger("epiforecast.errors")


class ForecastError(Exception):
    """Base exception for forecasting errors; `code` prefixes CLI diagnostics"""

    code = "ForecastError"


class DataError(ForecastError):
    """Exception for ingestion and dataset errors"""

    code = "DataError"


class MissingColumnError(DataError):
    """A required CSV column is absent"""

    code = "MissingColumn"

    def __init__(self, column: str):
        super().__init__(f"missing column {column!r}")
        self.column = column


class NonNumericCellError(DataError):
    """A cell that should hold a whole non-negative number does not"""

    code = "NonNumericCell"

    def __init__(self, row: int, column: str, value: str = "", expected="a count"):
        super().__init__(f"row {row}, column {column!r}: not {expected}: {value!r}")
        self.row = row
        self.column = column


class NegativeCountError(DataError):
    """A count column holds a negative value"""

    code = "NegativeCount"

    def __init__(self, row: int, column: str, value: int):
        super().__init__(f"row {row}, column {column!r}: negative count {value}")
        self.row = row
        self.column = column


class MalformedCsvError(DataError):
    """Rows with the wrong number of fields, or text that is not CSV"""

    code = "MalformedCsv"


class InvalidEncodingError(DataError):
    """Input bytes that do not decode as UTF-8"""

    code = "InvalidEncoding"


class InvalidDateError(DataError):
    """A date cell is not an ISO calendar date"""

    code = "InvalidDate"


class DeathsExceedConfirmedError(DataError):
    """More deaths than confirmed cases on one day"""

    code = "DeathsExceedConfirmed"


class NonContiguousDaysError(DataError):
    """day_index values skip or repeat"""

    code = "NonContiguousDays"


class UnknownColumnError(DataError):
    """A column name outside the ingestion schema"""

    code = "UnknownColumn"


class EmptyFeaturesError(UnknownColumnError):
    """An empty feature list; no column to model from"""


class TargetInFeaturesError(DataError):
    """The target column also appears among the features"""

    code = "TargetInFeatures"


class ConstantFeatureError(DataError):
    """A feature with no spread cannot be min-max scaled"""

    code = "ConstantFeature"


class EmptyInputError(DataError):
    """Nothing to work on: no rows, no split, no stream"""

    code = "EmptyInput"


class LengthMismatchError(DataError):
    """Actual and forecast vectors differ in length"""

    code = "LengthMismatch"


class AllActualsZeroError(DataError):
    """MAPE is undefined when every actual is zero"""

    code = "AllActualsZero"


class InvalidStageError(DataError):
    """A report stage outside fitting, validation and test"""

    code = "InvalidStage"


class SplitError(ForecastError):
    """Exception for train/validation/test range errors"""

    code = "SplitError"


class RangeOverlapError(SplitError):
    """Day ranges overlap or are out of order"""

    code = "RangeOverlap"


class RangeOutOfBoundsError(SplitError):
    """A day range falls outside the dataset"""

    code = "RangeOutOfBounds"


class EmptyTrainError(SplitError):
    """The training range holds no days"""

    code = "EmptyTrain"


class ModelError(ForecastError):
    """Exception for model fitting and evaluation errors"""

    code = "ModelError"


class RankDeficientError(ModelError):
    """The regression design matrix is singular"""

    code = "RankDeficient"


class TooFewRowsError(ModelError):
    """Too few rows for the requested fit"""

    code = "TooFewRows"


class DegreeZeroError(ModelError):
    """Polynomial degree below one"""

    code = "DegreeZero"


class ShapeMismatchError(ModelError):
    """Matrix, weight or bound dimensions disagree"""

    code = "ShapeMismatch"


class UnnormalizedInputError(ModelError):
    """Network inputs outside [0, 1]"""

    code = "UnnormalizedInput"


class InconsistentFactorsError(ModelError):
    """Adjusted bounds no longer enclose a positive span"""

    code = "InconsistentFactors"


class MissingNormalizationError(ModelError):
    """Forecasting needs the training bounds"""

    code = "MissingNormalization"


class InvalidModelFileError(ModelError):
    """A saved model or bounds file cannot be read back"""

    code = "InvalidModelFile"


class ConfigError(ForecastError):
    """Exception for configuration errors"""

    code = "ConfigError"


class InvalidConfigError(ConfigError):
    """A config key, value or parameter is not accepted"""

    code = "InvalidConfig"


class MissingInputError(ForecastError):
    """A file the command needs does not exist"""

    code = "MissingInput"


def handle_error(error: Exception, context: str = "") -> int:
    """Report an error as one `ERROR <Code>: message` line and pick the exit code"""
    if isinstance(error, ForecastError):
        print(f"ERROR {error.code}: {error}", file=sys.stderr)
        logger.debug("%s failed: %s", context or "command", error)
        return 1

    print(f"ERROR Internal: {type(error).__name__}: {error}", file=sys.stderr)
    logger.debug(
        "Internal error in %s\n%s", context or "command", traceback.format_exc()
    )
    return 2
