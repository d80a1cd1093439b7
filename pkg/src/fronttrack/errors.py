"""Exception hierarchy shared by every fronttrack module."""


class FrontTrackError(Exception):
    """Base class for all errors raised by fronttrack."""


class ModelInvalid(FrontTrackError):
    """The flux model violates hyperbolicity or the invariant map is singular."""


class OutOfDomain(FrontTrackError):
    """A state left the validity ball of the model."""


class SolverDiverged(FrontTrackError):
    """An inner Newton iteration failed to converge."""


class PreconditionError(FrontTrackError, ValueError):
    """An operation was called with arguments outside its contract."""


class NumericalInconsistency(FrontTrackError):
    """Two independent evaluations of the same quantity disagree."""


class SourceInvalid(FrontTrackError):
    """The source term produced non-finite values."""


class NotApplicable(FrontTrackError):
    """An audit's hypothesis is not met by the model."""


class NonTermination(FrontTrackError):
    """The event cap was exceeded; ``log`` holds the partial event log."""

    def __init__(self, message, log=None, pattern=None):
        super().__init__(message)
        self.log = log
        self.pattern = pattern


class ConfigError(FrontTrackError, ValueError):
    """An experiment or model configuration could not be parsed."""
