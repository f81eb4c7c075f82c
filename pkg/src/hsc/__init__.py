"""Classical and quantum free-energy minimisers for self-gravitating matter."""
from .casimir import CasimirFamily, validate_assumptions
from .classical import ClassicalState, classical_functionals, solve_classical
from .errors import (DomainTooSmall, HscError, InvalidArgument, InvalidFamily, MassUnreachable,
                     NoSolution, NonConvergence, NumericError, UndefinedRatio)
from .quantum import QuantumState, SCFControls, quantum_functionals, scf_multistart, scf_solve
from .radial import RadialField, RadialGrid, make_grid, solve_poisson

__version__ = "0.1.0"
