"""Exception hierarchy shared by all modules."""


class TransChaosError(Exception):
    """Base class for every error raised by the package."""


class DomainError(TransChaosError, ValueError):
    """A point lies outside the declared domain of a tabulated weight."""


class NotAdmissible(TransChaosError):
    """No (M, w) pair on the search lattice certifies the weight."""


class InconclusiveEvidence(TransChaosError):
    """Tier evidence is mixed; the partial report is attached as ``report``."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonGridShift(TransChaosError, ValueError):
    """A translation amount is not an integer multiple of the grid step."""


class HorizonExhausted(TransChaosError):
    """Escape sequences ran out of room before reaching the requested depth.

    ``levels`` is the number of levels that were found.
    """

    def __init__(self, levels, message=None):
        self.levels = levels
        super().__init__(message or f"only {levels} escape level(s) fit before x_max")


class GridTooCoarse(TransChaosError):
    """A witness interval cannot be resolved on the grid."""


class NormDiverged(TransChaosError):
    """The partial norm of a periodic witness fails the tail test."""


class NoSmallWeightSites(TransChaosError):
    """Too few sites with small weight were found for a windowed witness."""

    def __init__(self, found, message=None):
        self.found = found
        super().__init__(message or f"found only {found} small-weight site(s)")


class ExactBudgetExceeded(TransChaosError):
    """Exact separated-set search was asked for a family that is too large."""


class SupportOverflow(TransChaosError):
    """Shifted copies of a function would leave the grid."""


class ContractionViolated(TransChaosError):
    """The translation failed the exponential-weight contraction identity."""


class ConfigError(TransChaosError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
