"""Wave-front tracking with operator splitting for 2x2 balance laws.

The main entry points are :func:`fronttrack.tracker.run` for a single
simulation and the post-processing modules ``functionals``,
``characteristics``, ``analysis`` and ``structure`` for the estimates
audited on finished runs.
"""

from .errors import (
    ConfigError,
    FrontTrackError,
    ModelInvalid,
    NonTermination,
    NotApplicable,
    NumericalInconsistency,
    OutOfDomain,
    PreconditionError,
    SolverDiverged,
    SourceInvalid,
)
from .model import DecoupledBurgers, FluxModel, PSystem, QuadraticModel, SourceModel, State, build_model
from .tracker import (
    EventLog,
    FunctionDatum,
    PiecewiseConstantDatum,
    RunConfig,
    WavePattern,
    riemann_datum,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FrontTrackError", "ModelInvalid", "NonTermination", "NotApplicable",
    "NumericalInconsistency", "OutOfDomain", "PreconditionError", "SolverDiverged", "SourceInvalid",
    "DecoupledBurgers", "FluxModel", "PSystem", "QuadraticModel", "SourceModel", "State", "build_model",
    "EventLog", "FunctionDatum", "PiecewiseConstantDatum", "RunConfig", "WavePattern", "riemann_datum", "run",
]
