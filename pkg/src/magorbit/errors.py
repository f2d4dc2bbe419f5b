"""Exception hierarchy shared by all modules."""


class MagorbitError(Exception):
    """Base class for all package errors."""


class NumericalDegeneracyError(MagorbitError):
    """A matrix that must be invertible (metric, section Jacobian) is singular."""


class UnsupportedDimensionError(MagorbitError):
    pass


class RankError(MagorbitError):
    """The magnetic two-form is degenerate where nondegeneracy is required."""


class HypothesisViolationError(MagorbitError):
    pass


class IntegrationQualityError(MagorbitError):
    """Energy drift exceeded its budget or the inner Newton solve failed."""


class ChartEscapeError(MagorbitError):
    pass


class NoReturnError(MagorbitError):
    pass


class SectionQualityError(MagorbitError):
    """The flow crosses the Poincare section (nearly) tangentially."""


class FloquetConditioningError(MagorbitError):
    pass


class WindingClassificationError(MagorbitError):
    pass


class ConfigError(MagorbitError):
    pass


class ShootingError(MagorbitError):
    """Newton shooting did not produce an orbit.

    ``kind`` is one of ``"divergence"``, ``"max-iterations"``,
    ``"degenerate-direction"`` or ``"integration"``. ``candidate`` holds a
    closed orbit when the failure is a degenerate direction at a point that
    already closes up (a continuum of periodic orbits).
    """

    def __init__(self, kind, message, diagnostics=None, candidate=None):
        super().__init__(message)
        self.kind = kind
        self.diagnostics = diagnostics or {}
        self.candidate = candidate
