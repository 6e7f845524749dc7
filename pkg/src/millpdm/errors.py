"""Exception and warning types shared across the toolkit.

Errors split into two families so the CLI can map them onto exit codes:
``DataError`` (bad input, schema violations) and ``NumericError`` (a
computation that cannot produce a finite answer).
"""


class PdmError(Exception):
    """Base class for every error raised by millpdm."""

    exit_code = 1


class DataError(PdmError):
    exit_code = 3


class NumericError(PdmError):
    exit_code = 4


# dataset
class MissingColumn(DataError):
    pass


class UnexpectedColumn(DataError):
    pass


class NonNumericCell(DataError):
    pass


class MissingValue(DataError):
    pass


class EmptyDataset(DataError):
    pass


class UnknownCategory(DataError):
    pass


class EmptyIndexSet(DataError):
    pass


class BadFraction(DataError):
    pass


class BadK(DataError):
    pass


# stats
class UnknownColumn(DataError):
    pass


class TooFewRows(DataError):
    pass


# models
class DegenerateData(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class WidthMismatch(DataError):
    pass


class InvalidConfig(DataError):
    pass


# metrics
class LengthMismatch(DataError):
    pass


class TooFewSamples(DataError):
    pass


class ZeroVariance(NumericError):
    pass


class ShapeMismatch(DataError):
    pass


class NonBinaryValue(DataError):
    pass


class EmptyReportList(DataError):
    pass


# tuning
class EmptySpace(DataError):
    pass


class FoldError(PdmError):
    """A fit failure inside cross-validation, tagged with the fold index."""

    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


# explain
class TooManyFeatures(DataError):
    pass


class NotATreeModel(DataError):
    pass


class BudgetTooSmall(DataError):
    pass


class Misaligned(DataError):
    pass


# cli
class MissingArtifact(DataError):
    pass


class StageError(PdmError):
    """Raised by the pipeline with the failing stage's name attached."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


# warnings
class ConstantFeature(UserWarning):
    pass


class ConstantColumn(UserWarning):
    pass


class ZeroDivisionConvention(UserWarning):
    pass


class SvrNoConvergence(UserWarning):
    pass
