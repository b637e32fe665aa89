"""Sampling and analysis of Gaussian posteriors projected onto convex sets.

Samples of the projected posterior are obtained by solving randomized
constrained least squares problems; boundary densities, theory checks and a
hierarchical Gibbs sampler for polyhedral-cone constraints are included,
together with deblurring and CT experiment harnesses.
"""

from projpost.gaussian import Gaussian, mixed_basis_full_rank
from projpost.linop import DenseOperator, MatrixFreeOperator, SparseOperator
from projpost.sets import (
    Ball2D,
    Box,
    FaceId,
    Halfspace,
    NonnegativeOrthant,
    PolyhedralCone,
    QuarterDisc,
    WholeSpace,
)
from projpost.solver import (
    QuadraticProblem,
    SolverConfig,
    SolverReport,
    fista_solve,
    oblique_project,
    oblique_project_batch,
    sample_projected_posterior,
)

__version__ = "0.1.0"

__all__ = [
    "Ball2D",
    "Box",
    "DenseOperator",
    "FaceId",
    "Gaussian",
    "Halfspace",
    "MatrixFreeOperator",
    "NonnegativeOrthant",
    "PolyhedralCone",
    "QuadraticProblem",
    "QuarterDisc",
    "SolverConfig",
    "SolverReport",
    "SparseOperator",
    "WholeSpace",
    "fista_solve",
    "mixed_basis_full_rank",
    "oblique_project",
    "oblique_project_batch",
    "sample_projected_posterior",
]
