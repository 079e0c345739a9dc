"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to
1 (configuration), 2 (data) or 3 (numerics) without string matching.
"""


class HousingRiskError(Exception):
    exit_code = 3


# -- configuration -----------------------------------------------------------

class ConfigError(HousingRiskError):
    exit_code = 1


class MissingInputFile(ConfigError):
    """A configured input path does not exist (a data problem, exit 2)."""

    exit_code = 2

    def __init__(self, path, role="input"):
        self.path = str(path)
        self.role = role
        super().__init__(f"ConfigError: {role} file not found: {self.path}")


# -- data --------------------------------------------------------------------

class DataError(HousingRiskError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, row, column, detail=""):
        self.row = row
        self.column = column
        msg = f"cannot parse row {row}, column {column!r}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class MissingValue(DataError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"missing value at row {row}, column {column!r}")


class GapInDates(DataError):
    def __init__(self, month):
        self.month = str(month)
        super().__init__(f"monthly date axis has a gap before {self.month}")


class DateMisalignment(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class AlignmentEmpty(DataError):
    pass


class TooShort(DataError):
    pass


class NotEnoughRows(TooShort):
    pass


class SegmentTooShort(TooShort):
    pass


class NonPositiveValue(DataError):
    pass


class TauOutOfRange(DataError):
    pass


class TooManyCandidates(DataError):
    pass


class InfeasibleTrim(DataError):
    pass


# -- numerics ----------------------------------------------------------------

class NumericError(HousingRiskError):
    exit_code = 3


class ZeroVariance(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class CollinearRegressors(RankDeficient):
    pass


class NonPositiveDefinite(NumericError):
    def __init__(self, t, detail=""):
        self.t = t
        msg = f"conditional covariance not positive definite at t={t}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NonStationaryParams(NumericError):
    pass


class OptimizerDiverged(NumericError):
    pass


class EigenNotConverged(NumericError):
    pass
