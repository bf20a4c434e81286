"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: usage errors exit 1, data/validation
errors exit 2, numerical failures exit 3.
"""


class FoodwatchError(Exception):
    """Base class for all pipeline errors."""


class UsageError(FoodwatchError):
    """Bad command line arguments or malformed configuration keys."""


class DataError(FoodwatchError):
    """Malformed input data or violated data preconditions."""


class DataFormatError(DataError):
    """A record could not be parsed; message carries file and line number."""


class ReferentialError(DataError):
    """A record references an entity missing from the registry."""


class NumericalError(FoodwatchError):
    """Optimization diverged, quasi-separation, or a rank-deficient design."""
