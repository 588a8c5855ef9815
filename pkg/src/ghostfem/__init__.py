"""Ghost-point finite elements for the Poisson equation on level-set domains.

Bilinear elements on a Cartesian grid, boundary conditions imposed weakly
by Nitsche's method, and exact integration over cut cells.
"""
from .assembly1d import Interval1DSetup, assemble_dirichlet_1d, assemble_mixed_1d, build_blocks_1d
from .assembly2d import BVPSpec, Discretization, apply_neumann_gauge, assemble, solve
from .analysis import fit_order, l2_errors
from .grid import Grid
from .levelset import Circle, Flower, Hourglass, Interval1D, Leaf, snap_to_grid

__all__ = [
    "BVPSpec", "Circle", "Discretization", "Flower", "Grid", "Hourglass", "Interval1D",
    "Interval1DSetup", "Leaf", "apply_neumann_gauge", "assemble", "assemble_dirichlet_1d",
    "assemble_mixed_1d", "build_blocks_1d", "fit_order", "l2_errors", "snap_to_grid", "solve",
]
__version__ = "0.1.0"
