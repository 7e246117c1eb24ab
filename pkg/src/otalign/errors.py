"""Exception taxonomy shared across pipeline stages."""


class OtalignError(Exception):
    """Base class for all pipeline errors."""


class MalformedInput(OtalignError):
    """Raw input could not be decoded or parsed."""


class CalendarGap(OtalignError):
    """Timestamp falls outside the exchange calendar's coverage."""


class DegenerateEmbedding(OtalignError):
    """Embedding vector has zero norm and cannot be normalized."""


class SchemaError(OtalignError):
    """Record violates the documented interchange schema."""


class NormError(OtalignError):
    """Embedding norm is outside the unit-norm tolerance."""


class IncompleteBundle(OtalignError):
    """A stock-day bundle is missing one language side."""


class NumericalError(OtalignError):
    """Non-finite values or numerical breakdown in a solver."""


class OracleTooLarge(OtalignError):
    """Exact-LP oracle requested for an instance beyond its size cap."""


class ParameterError(OtalignError):
    """Operation parameter outside its valid range."""


class SingularSystem(OtalignError):
    """Normal equations are singular (only possible at lambda = 0)."""


class InsufficientData(OtalignError):
    """Too few observations for the requested fit or split."""


class DataError(OtalignError):
    """Inconsistent tabular input (duplicates, bad joins)."""


class UndefinedSharpe(OtalignError):
    """Zero-variance return series has no Sharpe ratio."""


class ConfigError(OtalignError):
    """Pipeline configuration is invalid; message lists field paths."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StageDependencyError(OtalignError):
    """A requested stage's upstream artifact is missing."""
