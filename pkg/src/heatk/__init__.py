"""Reconstruction of two-material heat-conductivity maps from full-field temperature data."""

from . import metrics
from .assembly import DesignSystem, assemble, read_matrix, read_vector, write_matrix, write_vector
from .estimator import ConductivityReconstructor
from .fem import (
    ForwardProblem,
    OutOfDomainError,
    SolverError,
    TemperatureSolution,
    energy,
    solve_forward,
    variational_residual,
)
from .grid import (
    Domain,
    EvaluationError,
    FieldFormatError,
    Grid,
    ScalarField,
    build_grid,
    read_field,
    sample_function,
    write_field,
)
from .lcurve import LCurvePoint, NoCornerError, SweepError, default_alphas, select_corner, sweep
from .penalties import (
    GradientMask,
    MaterialPair,
    build_mask,
    indicator_polynomial,
    masked_penalty,
    two_well_penalty,
)
from .phantoms import PhantomSpec, Shape, add_noise, make_case, rasterize
from .solvers import (
    ConditionReport,
    SolveDiagnostics,
    TikhonovProblem,
    condition_numbers,
    min_norm_lstsq,
    solve,
    solve_masked,
    solve_two_well,
)
from .testfuncs import TestFunction, enumerate_family

__version__ = "0.1.0"

__all__ = [
    "ConductivityReconstructor",
    "ConditionReport",
    "DesignSystem",
    "Domain",
    "EvaluationError",
    "FieldFormatError",
    "ForwardProblem",
    "GradientMask",
    "Grid",
    "LCurvePoint",
    "MaterialPair",
    "NoCornerError",
    "OutOfDomainError",
    "PhantomSpec",
    "ScalarField",
    "Shape",
    "SolveDiagnostics",
    "SolverError",
    "SweepError",
    "TemperatureSolution",
    "TestFunction",
    "TikhonovProblem",
    "add_noise",
    "assemble",
    "build_grid",
    "build_mask",
    "condition_numbers",
    "default_alphas",
    "energy",
    "enumerate_family",
    "indicator_polynomial",
    "make_case",
    "masked_penalty",
    "metrics",
    "min_norm_lstsq",
    "rasterize",
    "read_field",
    "read_matrix",
    "read_vector",
    "sample_function",
    "select_corner",
    "solve",
    "solve_forward",
    "solve_masked",
    "solve_two_well",
    "sweep",
    "two_well_penalty",
    "variational_residual",
    "write_field",
    "write_matrix",
    "write_vector",
]
