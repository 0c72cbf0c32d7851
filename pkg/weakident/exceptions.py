import logging

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


class WeakIdentError(Exception):
    """Base class for errors raised by the identification pipeline"""


class InvalidGrid(WeakIdentError, ValueError):
    """Raised when a grid or an observation set violates its invariants"""

    def __init__(self, reason: str) -> None:
        self.reason = reason

    def __str__(self):
        return f"Invalid grid: {self.reason}"


class UnsupportedDimension(WeakIdentError, ValueError):
    """Raised for more than two spatial dimensions"""

    def __init__(self, spatial_dims: int) -> None:
        self.spatial_dims = spatial_dims

    def __str__(self):
        return (
            f"spatial_dims must be 0, 1 or 2 but got {self.spatial_dims}"
        )


class FeatureNotFound(WeakIdentError, KeyError):
    """Raised when a feature is not part of a dictionary"""

    def __init__(self, feature) -> None:
        self.feature = feature

    def __str__(self):
        return f"Feature {self.feature} is not in the dictionary"


class InvalidTestFunction(WeakIdentError, ValueError):
    """Raised when test-function parameters cannot be honoured"""

    def __init__(self, reason: str) -> None:
        self.reason = reason

    def __str__(self):
        return f"Invalid test function: {self.reason}"


class EmptyInterior(WeakIdentError, ValueError):
    """Raised when no test region fits inside the grid along an axis"""

    def __init__(self, axis: str, count: int, m: int) -> None:
        self.axis = axis
        self.count = count
        self.m = m

    def __str__(self):
        return (
            f"Axis {self.axis} has {self.count} points but a test region"
            f" needs more than {2 * self.m + 1}"
        )


class NonFiniteFeature(WeakIdentError, ArithmeticError):
    """Raised when a monomial field overflows"""

    def __init__(self, index: int) -> None:
        self.index = index

    def __str__(self):
        return f"Feature {self.index} produced non-finite values"


class DegenerateColumn(WeakIdentError, ArithmeticError):
    """Raised when a feature column is identically zero"""

    def __init__(self, columns) -> None:
        self.columns = list(columns)

    def __str__(self):
        return f"Zero columns in feature matrix: {self.columns}"


class NoModel(WeakIdentError, ArithmeticError):
    """Raised when a fit produces no usable model"""

    def __init__(self, reason: str) -> None:
        self.reason = reason

    def __str__(self):
        return f"No model: {self.reason}"


class CrossValidationError(WeakIdentError, ArithmeticError):
    """Raised when every cross-validation fold is singular"""

    def __init__(self, trials: int) -> None:
        self.trials = trials

    def __str__(self):
        return f"All {self.trials} cross-validation partitions were singular"


class UndefinedMetric(WeakIdentError, ValueError):
    """Raised when an error metric has a zero denominator"""

    def __init__(self, metric: str) -> None:
        self.metric = metric

    def __str__(self):
        return f"{self.metric} is undefined for a zero reference"


class SimulationError(WeakIdentError, RuntimeError):
    """Raised when a reference simulation fails or blows up"""

    def __init__(self, system: str, reason: str) -> None:
        self.system = system
        self.reason = reason

    def __str__(self):
        return f"Simulation of {self.system} failed: {self.reason}"


class DatasetFormatError(WeakIdentError, ValueError):
    """Raised for a malformed WIDENT1 header or payload"""

    def __init__(self, path, reason: str) -> None:
        self.path = str(path)
        self.reason = reason

    def __str__(self):
        return f"{self.path}: {self.reason}"


class SizeMismatch(DatasetFormatError):
    """Raised when a payload length differs from the declared shape"""

    def __init__(self, path, expected: int, actual: int) -> None:
        super().__init__(
            path, f"expected {expected} values but found {actual}"
        )
        self.expected = expected
        self.actual = actual


class NonFiniteData(DatasetFormatError):
    """Raised when a payload contains NaN or infinite values"""

    def __init__(self, path) -> None:
        super().__init__(path, "payload contains non-finite values")


class UnknownSystem(WeakIdentError, KeyError):
    """Raised for a benchmark name that is not registered"""

    def __init__(self, name: str, available) -> None:
        self.name = name
        self.available = list(available)

    def __str__(self):
        return (
            f"Unknown system {self.name!r}; available:"
            f" {', '.join(self.available)}"
        )


class ConfigError(WeakIdentError, ValueError):
    """Raised for an invalid configuration key or value"""

    def __init__(self, key: str, reason: str) -> None:
        self.key = key
        self.reason = reason

    def __str__(self):
        return f"Config {self.key}: {self.reason}"
