"""Sparse polynomial and neural-network surrogates for Hilbert-valued
functions of many parameters, with a parametric-diffusion data generator,
sparse-grid error metrics and closed-form recovery guarantees.
"""

from .estimators import DNNSurrogate, SparsePolynomialSurrogate
from .hilbert import DiscreteHilbertSpace, HilbertElement, HilbertVector
from .multiindex import MultiIndexSet, anisotropic_set, hyperbolic_cross
from .polybasis import MeasurementMatrix, assemble_measurement_matrix
from .quadrature import SparseGrid, bochner_error, smolyak_grid
from .srlasso import (
    RecoveryProblem,
    RecoveryResult,
    SolverConfig,
    lambda_rule,
    recover_coefficients,
    solve_lasso,
    solve_srlasso,
)

__version__ = "0.1.0"

__all__ = [
    "DNNSurrogate",
    "SparsePolynomialSurrogate",
    "DiscreteHilbertSpace",
    "HilbertElement",
    "HilbertVector",
    "MultiIndexSet",
    "anisotropic_set",
    "hyperbolic_cross",
    "MeasurementMatrix",
    "assemble_measurement_matrix",
    "SparseGrid",
    "bochner_error",
    "smolyak_grid",
    "RecoveryProblem",
    "RecoveryResult",
    "SolverConfig",
    "lambda_rule",
    "recover_coefficients",
    "solve_lasso",
    "solve_srlasso",
    "__version__",
]
