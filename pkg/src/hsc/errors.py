"""Exception hierarchy shared by the solvers and the CLI."""


class HscError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidArgument(HscError, ValueError):
    exit_code = 2


class InvalidFamily(InvalidArgument):
    pass


class NumericError(HscError, ArithmeticError):
    exit_code = 3


class NonConvergence(NumericError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class UndefinedRatio(NumericError):
    pass


class DomainTooSmall(HscError):
    exit_code = 4


class NoSolution(HscError):
    exit_code = 4


class MassUnreachable(HscError):
    exit_code = 4

    def __init__(self, message, max_mass=0.0):
        super().__init__(message)
        self.max_mass = max_mass
