"""Exception types shared across the package."""


class OodProfileError(Exception):
    """Base class for all library errors."""


class RejectionBudgetExceeded(OodProfileError):
    """Rejection sampler exhausted its draw budget without an acceptance."""


class SpecGenerationFailed(OodProfileError):
    """Random feature-spec generation could not produce a valid spec."""


class DegenerateGap(OodProfileError, ValueError):
    """Window gap is too narrow to host a detectable interpolatory sample."""


class EmptyColumn(OodProfileError, ValueError):
    """An operation received a feature column with no values."""


class DimensionMismatch(OodProfileError, ValueError):
    """Sample dimension does not match the fitted model or dataset."""


class LengthMismatch(OodProfileError, ValueError):
    """Paired vectors have different lengths."""


class ZeroBaseline(OodProfileError, ValueError):
    """In-distribution baseline RMSE is zero; normalization is undefined."""


class InsufficientData(OodProfileError, ValueError):
    """Not enough rows to fit and select a regression model."""


class EmptyInput(OodProfileError, ValueError):
    """Aggregation over an empty record list."""


class RepetitionBudgetExceeded(OodProfileError):
    """A repetition could not be regenerated within its attempt budget."""


class DatasetFormatError(OodProfileError, ValueError):
    """Dataset or spec file failed to parse; message names the offending row."""
