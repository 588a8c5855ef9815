"""Relative L2 errors of the solution and its gradient, and order fitting.

Errors use the midpoint rule on an ``M x M`` lattice of sample cells over R
(``M = 3N + 1`` by default, so samples never align with grid nodes), keeping
only samples inside Omega_h: every sample in an interior cell and, in a cut
cell, those on the inner side of the boundary segment. A cut polygon is the
cell clipped by the half plane of its segment, so that test is exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly2d import Discretization
from .levelset import CellLabel


class EmptySampleSet(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class ErrorReport:
    N: int
    h: float
    error: float
    grad_error: float
    cond: float = float("nan")
    iterations: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.error) and np.isfinite(self.grad_error)):
            raise ValueError("errors must be finite")
        if self.error < 0 or self.grad_error < 0:
            raise ValueError("errors must be non-negative")


def sample_points(disc: Discretization, M_quad: int | None = None):
    """Midpoint samples inside Omega_h as ``(points, cells, s, t)``."""
    grid = disc.grid
    M = 3 * grid.N + 1 if M_quad is None else M_quad
    H = (grid.x1 - grid.x0) / M
    c = grid.x0 + (np.arange(M) + 0.5) * H
    X, Y = np.meshgrid(c, grid.y0 + (np.arange(M) + 0.5) * H)
    x, y = X.ravel(), Y.ravel()
    cells, s, t = grid.locate(x, y)
    labels = disc.cell_labels[cells]
    keep = labels == CellLabel.INTERIOR
    cut = np.flatnonzero(labels == CellLabel.CUT)
    if cut.size:
        cut_cells = cells[cut]
        ids = np.array(sorted(disc.polygons))
        A = np.array([disc.polygons[c].boundary_segment[0] for c in ids])
        nrm = np.array([disc.polygons[c].normal for c in ids])
        k = np.searchsorted(ids, cut_cells)
        d = np.column_stack([x[cut], y[cut]]) - A[k]
        whole = np.array([disc.polygons[c].degenerate for c in ids])[k]
        keep[cut] = (np.einsum("ij,ij->i", d, nrm[k]) < 0) | whole
    if not keep.any():
        raise EmptySampleSet("no sample point falls inside the domain")
    return np.column_stack([x[keep], y[keep]]), cells[keep], s[keep], t[keep]


def evaluate_fe(u, disc: Discretization, cells, s, t):
    """Bilinear interpolant of nodal ``u`` and its gradient at cell-local points."""
    ids = disc.grid.cell_vertex_table()[cells]
    U = np.asarray(u, dtype=float)[ids]
    w = np.stack([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t], axis=1)
    gs = np.stack([-(1 - t), 1 - t, t, -t], axis=1)
    gt = np.stack([-(1 - s), -s, s, 1 - s], axis=1)
    val = np.einsum("ij,ij->i", w, U)
    grad = np.column_stack([np.einsum("ij,ij->i", gs, U), np.einsum("ij,ij->i", gt, U)]) / disc.grid.h
    return val, grad


def l2_errors(u, exact, exact_grad, disc: Discretization, M_quad: int | None = None,
              zero_mean: bool = False) -> tuple[float, float]:
    """``(error, grad_error)``: relative L2 norms of ``u_h - u`` and of their gradients.

    With ``zero_mean=True`` both functions are shifted to zero sample mean
    first (pure Neumann problems determine u only up to a constant).
    """
    pts, cells, s, t = sample_points(disc, M_quad)
    uh, guh = evaluate_fe(u, disc, cells, s, t)
    ue = np.asarray(exact(pts[:, 0], pts[:, 1]), dtype=float)
    ge = np.asarray(exact_grad(pts[:, 0], pts[:, 1]), dtype=float)
    if zero_mean:
        uh = uh - uh.mean()
        ue = ue - ue.mean()
    err = np.sqrt(np.sum((uh - ue) ** 2) / np.sum(ue**2))
    gerr = np.sqrt(np.sum((guh - ge) ** 2) / np.sum(ge**2))
    return float(err), float(gerr)


def l2_errors_1d(u, x_nodes, exact, exact_deriv, a: float, b: float,
                 M_quad: int | None = None) -> tuple[float, float]:
    """1D analogue on ``[a, b]`` with ``M = 3N + 1`` midpoint samples over [0, 1]."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    N = len(x_nodes) - 1
    h = x_nodes[1] - x_nodes[0]
    M = 3 * N + 1 if M_quad is None else M_quad
    xs = x_nodes[0] + (np.arange(M) + 0.5) * (x_nodes[-1] - x_nodes[0]) / M
    xs = xs[(xs > a) & (xs < b)]
    if xs.size == 0:
        raise EmptySampleSet("no sample point falls inside [a, b]")
    uh = np.interp(xs, x_nodes, u)
    k = np.clip(((xs - x_nodes[0]) // h).astype(int), 0, N - 1)
    duh = (u[k + 1] - u[k]) / h
    ue, due = exact(xs), exact_deriv(xs)
    err = np.sqrt(np.sum((uh - ue) ** 2) / np.sum(ue**2))
    gerr = np.sqrt(np.sum((duh - due) ** 2) / np.sum(due**2))
    return float(err), float(gerr)


def fit_slope(h, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(h) < 2 or len(np.unique(h)) < 2:
        raise InsufficientData("need at least two distinct h values")
    return float(np.polyfit(np.log(h), np.log(v), 1)[0])


def fit_order(reports, attr: str = "error", min_points: int = 2) -> float:
    """Convergence order from a list of :class:`ErrorReport` (or ``(h, error)`` pairs)."""
    reports = list(reports)
    if len({_h(r) for r in reports}) < min_points:
        raise InsufficientData(f"need at least {min_points} reports with distinct h")
    hs = [_h(r) for r in reports]
    vals = [getattr(r, attr) if isinstance(r, ErrorReport) else r[1] for r in reports]
    return fit_slope(hs, vals)


def _h(r):
    return r.h if isinstance(r, ErrorReport) else r[0]
