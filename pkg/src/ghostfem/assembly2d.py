"""Global systems for the Poisson problem on an embedded 2D domain.

With S the stiffness matrix over Omega_h, M the mass matrix, P the boundary
mass on Gamma_D, and S_T = flux + flux^T the symmetric Nitsche flux on
Gamma_D (``flux[i, j] = int (n . grad phi_j) phi_i``):

* Dirichlet: ``A = S - S_T + lam P``, ``F = M f + (lam P - D) g_D``
* Neumann:   ``A = S``,               ``F = M f + N g_N``
* Mixed:     both boundary parts, split per segment by ``dirichlet_region``

Inactive nodes get identity rows and a zero right-hand side.

The penalty is ``lam = h**-alpha``. With a unit constant this does not make
the Nitsche form coercive on every cut cell: a cell whose trace ratio
``rho_K = max ||d_n v||^2_Gamma / ||grad v||^2_K`` exceeds ``lam`` can give
negative eigenvalues. ``penalty="robust"`` (the default) raises the penalty
on such cells only, to ``margin * rho_K``; ``penalty="uniform"`` keeps
``lam`` everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import CutPolygon, cut_polygons, trace_ratio
from .grid import Grid
from .levelset import CellLabel, NodeLabel, NodeValues, classify_cells, classify_nodes, snap_to_grid
from .linalg import cg, csr_from_triplets
from .quadrature import (
    GAUSS3_WEIGHTS,
    basis_gradients,
    basis_values,
    boundary_matrices,
    local_mass_matrix,
    local_stiffness_matrix,
    segment_points,
)

BC_KINDS = ("dirichlet", "neumann", "mixed")
PENALTY_MODES = ("robust", "uniform")
ROBUST_MARGIN = 2.0

_REF_MASS = local_mass_matrix(None, 1.0)
_REF_STIFF = local_stiffness_matrix(None)


class CompatibilityViolation(ValueError):
    """Neumann data violate ``int f + int g_N = 0`` beyond the tolerance."""


@dataclass
class BVPSpec:
    """Boundary value problem ``-lap u = f`` with its boundary data.

    ``f`` and ``g_D`` are callables ``(x, y) -> array``. ``g_N`` is called
    as ``g_N(x, y, n)`` with ``n`` the unit outward normal of the boundary
    segment, so flux data ``grad u . n`` can be expressed directly.
    ``dirichlet_region(x, y) -> bool`` selects Gamma_D for mixed problems.
    ``boundary_data`` is ``"analytic"`` (data evaluated at the segment
    quadrature points) or ``"nodal"`` (data interpolated from the cell
    vertices, as for ``f``).
    """

    bc: str
    f: Callable
    g_D: Callable | None = None
    g_N: Callable | None = None
    dirichlet_region: Callable | None = None
    exact: Callable | None = None
    exact_grad: Callable | None = None
    boundary_data: str = "analytic"

    def __post_init__(self):
        self.bc = self.bc.lower()
        if self.bc not in BC_KINDS:
            raise ValueError(f"unknown boundary condition {self.bc!r}; expected one of {BC_KINDS}")
        if self.boundary_data not in ("analytic", "nodal"):
            raise ValueError(f"boundary_data must be 'analytic' or 'nodal', got {self.boundary_data!r}")
        if self.bc in ("dirichlet", "mixed") and self.g_D is None:
            raise ValueError(f"{self.bc} problem needs g_D")
        if self.bc in ("neumann", "mixed") and self.g_N is None:
            raise ValueError(f"{self.bc} problem needs g_N")
        if self.bc == "mixed" and self.dirichlet_region is None:
            raise ValueError("mixed problem needs a dirichlet_region")

    def is_dirichlet(self, point) -> bool:
        if self.bc == "dirichlet":
            return True
        if self.bc == "neumann":
            return False
        return bool(self.dirichlet_region(point[0], point[1]))


@dataclass
class Discretization:
    """Geometry of one domain on one grid: labels and cut polygons."""

    grid: Grid
    values: NodeValues
    node_labels: np.ndarray
    cell_labels: np.ndarray
    polygons: dict[int, CutPolygon]

    @classmethod
    def build(cls, levelset, N: int, alpha_snap: float | None = 2.0, grid: Grid | None = None):
        """Sample ``levelset`` on an N x N grid and snap with ``h**alpha_snap``.

        ``alpha_snap=None`` skips snapping.
        """
        grid = grid or levelset.grid(N)
        values = NodeValues.sample(levelset, grid)
        if alpha_snap is not None:
            values = snap_to_grid(values, grid.h, alpha_snap)
        return cls.from_values(values, grid)

    @classmethod
    def from_values(cls, values: NodeValues, grid: Grid):
        unsnapped = not values.snapped
        nodes = classify_nodes(values, grid, allow_unsnapped=unsnapped)
        cells = classify_cells(values, grid, allow_unsnapped=unsnapped)
        polys = cut_polygons(values, grid, cells, allow_unsnapped=unsnapped)
        return cls(grid, values, nodes, cells, polys)

    @property
    def active(self) -> np.ndarray:
        return self.node_labels != NodeLabel.INACTIVE

    def active_cells(self) -> np.ndarray:
        return np.flatnonzero(self.cell_labels != CellLabel.EXTERIOR)


@dataclass
class Blocks2D:
    """Unscaled global blocks (CSR over all nodes) and right-hand-side parts.

    The penalty term is kept per Dirichlet cell (``pen_*`` arrays, ascending
    cell id) so that it can be weighted cell by cell.
    """

    S: sp.csr_matrix
    M: sp.csr_matrix
    S_T: sp.csr_matrix  # symmetric flux on Gamma_D
    source: np.ndarray  # M f
    flux_rhs: np.ndarray  # int_{Gamma_D} g_D (n . grad phi_i)
    neumann_rhs: np.ndarray  # int_{Gamma_N} g_N phi_i
    pen_nodes: np.ndarray  # (k, 4) node ids
    pen_mass: np.ndarray  # (k, 4, 4) int_{Gamma_K} phi_i phi_j
    pen_data: np.ndarray  # (k, 4) int_{Gamma_K} g_D phi_i
    pen_ratio: np.ndarray  # (k,) trace ratio rho_K
    n: int

    def penalty_weights(self, lam: float, mode: str = "robust", margin: float = ROBUST_MARGIN) -> np.ndarray:
        if mode not in PENALTY_MODES:
            raise ValueError(f"penalty mode must be one of {PENALTY_MODES}, got {mode!r}")
        if mode == "uniform":
            return np.full(len(self.pen_ratio), float(lam))
        return np.maximum(float(lam), margin * self.pen_ratio)

    def P(self, weights=None) -> sp.csr_matrix:
        """Boundary mass on Gamma_D, optionally weighted per cell."""
        w = np.ones(len(self.pen_ratio)) if weights is None else np.asarray(weights, dtype=float)
        rows = np.repeat(self.pen_nodes, 4, axis=1).ravel()
        cols = np.tile(self.pen_nodes, (1, 4)).ravel()
        return csr_from_triplets(rows, cols, (self.pen_mass * w[:, None, None]).ravel(), self.n)

    def penalty_rhs(self, weights=None) -> np.ndarray:
        w = np.ones(len(self.pen_ratio)) if weights is None else np.asarray(weights, dtype=float)
        out = np.zeros(self.n)
        np.add.at(out, self.pen_nodes.ravel(), (self.pen_data * w[:, None]).ravel())
        return out


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    active: np.ndarray
    lam: float
    alpha: float | None
    bc: str
    blocks: Blocks2D | None = None
    disc: Discretization | None = None
    lumped_mass: np.ndarray | None = None
    penalty_mode: str = "robust"
    boosted_cells: int = 0
    gauged: bool = False
    compatibility_residual: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        A = self.matrix
        return float(sp.linalg.norm(A - A.T) / sp.linalg.norm(A))


def penalty(h: float, alpha: float) -> float:
    return h ** (-alpha)


def assemble_blocks(spec: BVPSpec, disc: Discretization) -> Blocks2D:
    """Global S, M, S_T, penalty pieces and right-hand sides, by ascending cell id."""
    grid = disc.grid
    h = grid.h
    n = grid.n_nodes
    table = grid.cell_vertex_table()
    cells = disc.active_cells()
    is_cut = disc.cell_labels[cells] == CellLabel.CUT

    K = np.broadcast_to(_REF_STIFF, (len(cells), 4, 4)).copy()
    Mloc = np.broadcast_to(_REF_MASS * h * h, (len(cells), 4, 4)).copy()
    T = np.zeros((len(cells), 4, 4))
    flux_rhs = np.zeros(n)
    neu_rhs = np.zeros(n)
    pen_nodes, pen_mass, pen_data, pen_ratio = [], [], [], []

    xy = grid.node_coords()
    for k in np.flatnonzero(is_cut):
        cell = int(cells[k])
        poly = disc.polygons[cell]
        if poly.degenerate:
            continue
        K[k] = local_stiffness_matrix(poly)
        Mloc[k] = local_mass_matrix(poly, h)
        A, B = poly.local_segment
        bmass, bflux = boundary_matrices(A, B, poly.normal, h)
        ids = table[cell]
        mid = 0.5 * (poly.boundary_segment[0] + poly.boundary_segment[1])
        dirichlet = spec.is_dirichlet(mid)
        if spec.boundary_data == "nodal":
            vx, vy = xy[ids, 0], xy[ids, 1]
            if dirichlet:
                g = np.asarray(spec.g_D(vx, vy), dtype=float)
                data = bmass @ g
                flux_rhs[ids] += bflux.T @ g
            else:
                g = np.asarray(spec.g_N(vx, vy, poly.normal), dtype=float)
                neu_rhs[ids] += bmass @ g
        else:
            pts = segment_points(*poly.boundary_segment)
            w = GAUSS3_WEIGHTS * poly.segment_length
            lpts = segment_points(A, B)
            phi = basis_values(lpts)
            if dirichlet:
                g = np.asarray(spec.g_D(pts[:, 0], pts[:, 1]), dtype=float)
                dn = basis_gradients(lpts, h) @ poly.normal
                data = phi @ (w * g)
                flux_rhs[ids] += dn @ (w * g)
            else:
                g = np.asarray(spec.g_N(pts[:, 0], pts[:, 1], poly.normal), dtype=float)
                neu_rhs[ids] += phi @ (w * g)
        if dirichlet:
            T[k] = bflux + bflux.T
            pen_nodes.append(ids)
            pen_mass.append(bmass)
            pen_data.append(data)
            pen_ratio.append(trace_ratio(poly))

    rows = np.repeat(table[cells], 4, axis=1).ravel()
    cols = np.tile(table[cells], (1, 4)).ravel()
    S = csr_from_triplets(rows, cols, K.ravel(), n)
    M = csr_from_triplets(rows, cols, Mloc.ravel(), n)
    ST = csr_from_triplets(rows, cols, T.ravel(), n)
    fn = np.asarray(spec.f(xy[:, 0], xy[:, 1]), dtype=float)
    fn = np.where(disc.active, fn, 0.0)
    return Blocks2D(
        S, M, ST, M @ fn, flux_rhs, neu_rhs,
        np.array(pen_nodes, dtype=int).reshape(-1, 4),
        np.array(pen_mass).reshape(-1, 4, 4),
        np.array(pen_data).reshape(-1, 4),
        np.array(pen_ratio),
        n,
    )


def _identity_rows(A: sp.csr_matrix, rhs: np.ndarray, active: np.ndarray):
    keep = sp.diags(active.astype(float))
    A = (keep @ A @ keep + sp.diags((~active).astype(float))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A, np.where(active, rhs, 0.0)


def compose(blocks: Blocks2D, disc: Discretization, bc: str, lam: float,
            alpha: float | None = None, penalty_mode: str = "robust",
            compat_tol: float | None = None) -> AssembledSystem:
    """Combine unscaled blocks into the system for boundary condition ``bc``."""
    active = disc.active
    weights = blocks.penalty_weights(lam, penalty_mode)
    if bc == "neumann":
        A = blocks.S
        F = blocks.source + blocks.neumann_rhs
    else:
        A = blocks.S - blocks.S_T + blocks.P(weights)
        F = blocks.source + blocks.penalty_rhs(weights) - blocks.flux_rhs + blocks.neumann_rhs
    A, F = _identity_rows(A, F, active)
    lumped = np.asarray(blocks.M.sum(axis=1)).ravel()
    system = AssembledSystem(A, F, active, lam, alpha, bc, blocks, disc, lumped, penalty_mode,
                             int(np.sum(weights > lam)))
    if bc == "neumann":
        # int f_h + int g_N relative to the size of its two parts
        total = float(F.sum())
        scale = float(np.abs(blocks.source).sum() + np.abs(blocks.neumann_rhs).sum())
        resid = abs(total) / scale if scale > 0 else 0.0
        system.compatibility_residual = resid
        tol = max(1e-8, disc.grid.h) if compat_tol is None else compat_tol
        if resid > tol:
            raise CompatibilityViolation(
                f"Neumann data incompatible: relative residual {resid:.3e} > {tol:.1e}")
    return system


def assemble(spec: BVPSpec, disc: Discretization, lam: float | None = None,
             alpha: float = 2.0, penalty_mode: str = "robust",
             compat_tol: float | None = None) -> AssembledSystem:
    """Assemble the global system; ``lam`` defaults to ``h**-alpha``."""
    if lam is None:
        lam = penalty(disc.grid.h, alpha)
    blocks = assemble_blocks(spec, disc)
    return compose(blocks, disc, spec.bc, lam, alpha, penalty_mode, compat_tol)


def apply_neumann_gauge(system: AssembledSystem) -> AssembledSystem:
    """Border the Neumann matrix with the zero-mean constraint ``m . u = 0``.

    ``m`` holds the lumped masses (row sums of M). The result has one extra
    row and column; its last unknown is the Lagrange multiplier.
    """
    m = np.where(system.active, system.lumped_mass, 0.0)
    border = sp.csr_matrix(m.reshape(-1, 1))
    A = sp.bmat([[system.matrix, border], [border.T, None]], format="csr")
    A.sort_indices()
    out = AssembledSystem(A, np.append(system.rhs, 0.0), np.append(system.active, True),
                          system.lam, system.alpha, system.bc, system.blocks, system.disc,
                          system.lumped_mass, system.penalty_mode, system.boosted_cells,
                          gauged=True, compatibility_residual=system.compatibility_residual)
    out.extra["n_primal"] = system.n
    return out


def solve(system: AssembledSystem, tol: float = 1e-10, max_iter: int | None = None):
    """Solve with Jacobi-preconditioned CG; returns ``(u, CGResult)``.

    A gauged Neumann system is solved through its equivalent projected form:
    the multiplier follows from summing the active rows, CG solves the then
    consistent semidefinite system, and the zero-mean constant is restored.
    """
    if not system.gauged:
        res = cg(system.matrix, system.rhs, tol=tol, max_iter=max_iter)
        return res.x, res
    n = system.extra["n_primal"]
    A = system.matrix[:n, :n]
    F = system.rhs[:n]
    active = system.active[:n]
    m = np.where(active, system.lumped_mass, 0.0)
    ones = active.astype(float)
    mu = (ones @ F) / (ones @ m)
    res = cg(A, F - mu * m, tol=tol, max_iter=max_iter)
    u = res.x
    u -= (m @ u) / (m @ ones) * ones
    res.x = u
    return u, res
