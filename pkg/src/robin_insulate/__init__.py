"""Optimal thermal insulation of a 2D body under Robin heat exchange."""

from .bounds import dirichlet_limit_check, isoperimetric_bound, level_set_diagnostic
from .estimators import InsulationOptimizer, RobinSolver, ThinLayerSolver
from .fem import ConvergenceError, ProblemParams, ScalarField, SourceField, heat_content, solve_layer, solve_limit
from .gamma import gamma_sweep
from .insulation import (
    AlternatingMinimizationError,
    BoundaryTrace,
    InsulationDistribution,
    alternating_minimize,
    optimal_h,
    threshold_constant,
)
from .mesh import MeshError, TriangleMesh, extrude_layer, make_disk_mesh, make_polygon_mesh
from .radial import dirichlet_ball_solution, layer_ball_solution, limit_ball_solution

__version__ = "0.1.0"

__all__ = [
    "AlternatingMinimizationError",
    "BoundaryTrace",
    "ConvergenceError",
    "InsulationDistribution",
    "InsulationOptimizer",
    "MeshError",
    "ProblemParams",
    "RobinSolver",
    "ScalarField",
    "SourceField",
    "ThinLayerSolver",
    "TriangleMesh",
    "alternating_minimize",
    "dirichlet_ball_solution",
    "dirichlet_limit_check",
    "extrude_layer",
    "gamma_sweep",
    "heat_content",
    "isoperimetric_bound",
    "layer_ball_solution",
    "level_set_diagnostic",
    "limit_ball_solution",
    "make_disk_mesh",
    "make_polygon_mesh",
    "optimal_h",
    "solve_layer",
    "solve_limit",
    "threshold_constant",
]
