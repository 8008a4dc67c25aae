"""Exception hierarchy shared by all zmed modules.

Three buckets drive the CLI exit codes: UsageError (exit 1), DataError
(exit 2), NumericalError (exit 3).
"""


class ZmedError(Exception):
    """Base class for all zmed errors."""


class UsageError(ZmedError):
    """Bad command line or configuration usage."""


class DataError(ZmedError):
    """Malformed, inconsistent, or degenerate input data."""


class NumericalError(ZmedError):
    """A numerical routine failed to produce a usable result."""


# --- data errors -----------------------------------------------------------

class ConstantColumn(DataError):
    """A genotype column has zero variance (monomorphic SNP)."""

    def __init__(self, column, message=None):
        self.column = int(column)
        super().__init__(message or f"column {column} has zero variance")


class ShapeMismatch(DataError):
    pass


class OrderMismatch(DataError):
    """SNP identifiers disagree between inputs that must share ordering."""


class IndexOutOfRange(DataError):
    pass


class ConfigInvalid(DataError):
    """A scenario or run configuration violates a named constraint."""


class BlockOverlap(DataError):
    """The null LD block is not disjoint from the analysis block."""


class ParseError(DataError):
    """A data file could not be parsed; carries the offending line."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class SchemaError(DataError):
    """A data file is missing required columns."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing required column(s): {', '.join(self.missing)}")


class NoPositives(DataError):
    """A prediction table contains no causal gene."""


# --- numerical errors ------------------------------------------------------

class NumericalFailure(NumericalError):
    """A matrix decomposition did not converge."""


class DegenerateRegression(NumericalError):
    """A regression problem has no usable variation."""


class Diverged(NumericalError):
    """Variational optimization produced a non-finite objective."""


class IllConditioned(NumericalError):
    """A design column is unusable; carries the offending column index."""

    def __init__(self, column, message=None):
        self.column = int(column)
        super().__init__(message or f"design column {column} is not finite")


class RankDeficient(NumericalError):
    pass


class ZeroInstrument(NumericalError):
    """The instrument (eQTL) vector has no signal to regress on."""


class DegenerateDesign(NumericalError):
    """Too few observations for the requested regression."""


class ZeroVariance(NumericalError):
    """A vector required to vary is constant."""
