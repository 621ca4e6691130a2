"""Exception hierarchy shared by the solvers.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``SolverError`` -> 3,
``RegimeError`` -> 4.
"""


class MemdiffError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MemdiffError):
    """Malformed or inconsistent input."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class SolverError(MemdiffError):
    """A numerical procedure failed to converge or hit a singular system."""


class RegimeError(MemdiffError):
    """The inputs fall outside the regime where a result is defined."""


class FeasibilityViolated(RegimeError):
    pass


class NoSignDefiniteEigenvector(SolverError):
    pass


class DenominatorNotPositive(RegimeError):
    pass


class NewtonDiverged(SolverError):
    pass


class NegativeSolution(RegimeError):
    pass


class EmptyBranch(RegimeError):
    pass


class SingularBorderedSystem(SolverError):
    pass


class Indeterminate(RegimeError):
    pass


class NoSignChange(RegimeError):
    pass


class SolvabilityViolated(RegimeError):
    pass


class A2Violated(RegimeError):
    pass


class PreconditionViolated(RegimeError):
    pass


class AmplitudeZero(RegimeError):
    pass


class OutOfRegime(RegimeError):
    pass


class NewtonLostEigenvalue(SolverError):
    pass


class CountJumpNotTwo(SolverError):
    pass


class StepUnstable(SolverError):
    pass


class HistoryUnderrun(SolverError):
    pass
