"""Gaussian free field on lattice domain flows via the Hadamard operator.

Modules
-------
grid       square lattice and domain masks
flow       growing domains, entry times, shells
dirichlet  Dirichlet Laplacian, Green kernel, spectral calculus
harmonic   harmonic measure, sweep, variance rate
hadamard   the operator ``Q_t`` in exact and kernel mode
fields     white noise, free field, boundary processes
stats      streaming moment estimators
cli        experiment runner
"""
__version__ = "0.1.0"

from . import dirichlet, errors, fields, flow, grid, hadamard, harmonic, stats  # noqa: E402
from .dirichlet import (  # noqa: E402
    apply_inv_sqrt,
    apply_sqrt,
    assemble,
    dirichlet_inner,
    eigendecompose,
    green_kernel,
    green_matrix,
    green_solver,
    solve_poisson,
)
from .fields import (  # noqa: E402
    RngSpec,
    boundary_average,
    boundary_average_cov,
    gaussian_bump,
    gff_via_hadamard,
    gff_via_spectral,
    indicator_of_disk,
    point_mass,
    sample_boundary_noise,
    sample_pairings,
    sample_white_noise,
    skeleton_point_mass,
    time_change_check,
    trajectory,
)
from .flow import Annular, ConcentricDisk, StarShaped, build_flow, flow_grid, polar_integrate  # noqa: E402
from .grid import DomainMask, Grid, build_grid, is_nested, mask_from_predicate  # noqa: E402
from .hadamard import (  # noqa: E402
    apply_Q,
    apply_Q_star,
    build_exact_mode,
    build_kernel_mode,
    gram,
    gram_defect,
    increment,
    increment_residual,
)
from .harmonic import (  # noqa: E402
    harmonic_measure,
    harmonic_measures,
    harmonic_sweep,
    kappa,
    modified_green_potential,
    poisson_extend,
)
from .stats import CovAccumulator, independence_z  # noqa: E402

__all__ = [
    "__version__",
    "dirichlet",
    "errors",
    "fields",
    "flow",
    "grid",
    "hadamard",
    "harmonic",
    "stats",
    "apply_inv_sqrt",
    "apply_sqrt",
    "assemble",
    "dirichlet_inner",
    "eigendecompose",
    "green_kernel",
    "green_matrix",
    "green_solver",
    "solve_poisson",
    "RngSpec",
    "boundary_average",
    "boundary_average_cov",
    "gaussian_bump",
    "gff_via_hadamard",
    "gff_via_spectral",
    "indicator_of_disk",
    "point_mass",
    "sample_boundary_noise",
    "sample_pairings",
    "sample_white_noise",
    "skeleton_point_mass",
    "time_change_check",
    "trajectory",
    "Annular",
    "ConcentricDisk",
    "StarShaped",
    "build_flow",
    "flow_grid",
    "polar_integrate",
    "DomainMask",
    "Grid",
    "build_grid",
    "is_nested",
    "mask_from_predicate",
    "apply_Q",
    "apply_Q_star",
    "build_exact_mode",
    "build_kernel_mode",
    "gram",
    "gram_defect",
    "increment",
    "increment_residual",
    "harmonic_measure",
    "harmonic_measures",
    "harmonic_sweep",
    "kappa",
    "modified_green_potential",
    "poisson_extend",
    "CovAccumulator",
    "independence_z",
]
