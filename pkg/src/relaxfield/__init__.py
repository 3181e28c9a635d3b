"""Finite-difference Laplace potentials and electric fields for multi-electrode layouts."""

from .field import (
    FieldGrid,
    PolyCoeffs,
    chebyshev_nodes,
    field_midpoint,
    field_polynomial,
    lagrange_interpolate,
    poly_derivative,
)
from .grid import (
    DeviceLayout,
    ElectrodeRegion,
    GridSpec,
    PotentialGrid,
    build_grid,
    canonical_layout,
    rasterize_region,
)
from .solver import (
    ConvergenceTrace,
    SolveReport,
    SolverConfig,
    adapt_beta,
    direct_solve,
    gauss_seidel_sweep,
    jacobi_sweep,
    residual_norm,
    solve,
    sor_sweep,
)

__all__ = [
    "ConvergenceTrace",
    "DeviceLayout",
    "ElectrodeRegion",
    "FieldGrid",
    "GridSpec",
    "PolyCoeffs",
    "PotentialGrid",
    "SolveReport",
    "SolverConfig",
    "adapt_beta",
    "build_grid",
    "canonical_layout",
    "chebyshev_nodes",
    "direct_solve",
    "field_midpoint",
    "field_polynomial",
    "gauss_seidel_sweep",
    "jacobi_sweep",
    "lagrange_interpolate",
    "poly_derivative",
    "rasterize_region",
    "residual_norm",
    "solve",
    "sor_sweep",
]

__version__ = "0.1.0"
