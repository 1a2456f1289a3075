"""Exception hierarchy shared across the package.

Two broad families matter to callers (and to the CLI exit codes):
``DataError`` for problems with the inputs themselves, ``NumericError``
for estimation failures on otherwise valid data.
"""


class HouseFactorsError(Exception):
    """Base class for all package errors."""


class UsageError(HouseFactorsError):
    """Invalid or conflicting configuration supplied by the caller."""


class DataError(HouseFactorsError):
    """Input data violates a structural requirement."""


class MalformedRowError(DataError):
    """A panel file row could not be parsed; carries the line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CalendarGapError(DataError):
    """The quarter calendar has a hole; names the missing quarter."""


class DuplicateCellError(DataError):
    """The same (asset, quarter, series) cell appears more than once."""


class NonPositiveLevelError(DataError):
    """A level series that must be positive is not."""


class UnknownSeriesError(DataError):
    """A series kind is not present in the panel or not recognized."""


class InsufficientDataError(DataError):
    """Too few observations or eligible assets for the requested operation."""


class AlignmentError(DataError):
    """Two series that must share a calendar do not."""


class NumericError(HouseFactorsError):
    """Estimation failed for numerical reasons."""


class RankDeficiencyError(NumericError):
    """Design matrix is rank deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(f"rank-deficient design; collinear columns: {', '.join(self.columns)}")


class ZeroVarianceError(NumericError):
    """A series required to vary is constant."""
