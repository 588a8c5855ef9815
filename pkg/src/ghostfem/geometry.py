"""Cut-cell polygons built from nodal level-set values.

For a cut cell the boundary is replaced by the straight segment joining the
two edge crossings of the linear interpolant of ``phi``. The crossing where
the counterclockwise walk leaves the domain is ``A``; the one where it
re-enters is ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import Grid
from .levelset import CellLabel, NodeValues, classify_cells
from .quadrature import ZeroLengthSegment, local_stiffness_matrix, normal_derivative_mass


class GeometryError(ValueError):
    pass


class AmbiguousCut(GeometryError):
    """The boundary crosses a cell more than once (checkerboard signs)."""


class DegeneratePolygon(GeometryError):
    pass


__all__ = [
    "AmbiguousCut",
    "CutPolygon",
    "DegeneratePolygon",
    "EdgeCrossing",
    "GeometryError",
    "ZeroLengthSegment",
    "build_polygon",
    "trace_ratio",
    "cut_polygons",
    "edge_intersections",
    "segment_normal",
    "signed_area",
]

MIN_AREA = 1e-30


@dataclass(frozen=True)
class EdgeCrossing:
    point: np.ndarray
    edge: int  # edge k joins local vertex k to vertex (k + 1) % 4
    theta: float


@dataclass(frozen=True)
class CutPolygon:
    cell: int
    vertices: np.ndarray  # (m, 2) physical coordinates, counterclockwise
    boundary_segment: tuple[np.ndarray, np.ndarray]
    normal: np.ndarray
    interior_node_ids: tuple[int, ...]
    origin: np.ndarray
    h: float
    # the segment collapsed onto the single outside vertex: the polygon is
    # the whole cell and there is no boundary contribution
    degenerate: bool = False

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def local_vertices(self) -> np.ndarray:
        return (self.vertices - self.origin) / self.h

    @property
    def local_segment(self) -> tuple[np.ndarray, np.ndarray]:
        A, B = self.boundary_segment
        return (A - self.origin) / self.h, (B - self.origin) / self.h

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def segment_length(self) -> float:
        A, B = self.boundary_segment
        return float(np.hypot(*(B - A)))


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def edge_intersections(phi, coords) -> tuple[EdgeCrossing, EdgeCrossing]:
    """Boundary crossings on the edges of one cut cell.

    ``phi`` holds the four vertex values and ``coords`` the four vertex
    positions, both in counterclockwise order. On an edge ``k -> k+1`` with a
    sign change the crossing is ``theta * P[k+1] + (1 - theta) * P[k]`` with
    ``theta = phi[k] / (phi[k] - phi[k+1])``.
    """
    phi = np.asarray(phi, dtype=float)
    coords = np.asarray(coords, dtype=float)
    inside = phi < 0
    A = B = None
    changes = 0
    for k in range(4):
        k1 = (k + 1) % 4
        if inside[k] == inside[k1]:
            continue
        changes += 1
        theta = phi[k] / (phi[k] - phi[k1])
        point = theta * coords[k1] + (1 - theta) * coords[k]
        crossing = EdgeCrossing(point, k, float(theta))
        if inside[k]:
            A = crossing
        else:
            B = crossing
    if changes == 0:
        raise GeometryError("cell is not cut: vertex signs agree")
    if changes > 2:
        raise AmbiguousCut(f"boundary crosses the cell {changes // 2} times; refine the grid")
    return A, B


def segment_normal(A, B, phi, coords) -> np.ndarray:
    """Unit normal of segment AB pointing toward increasing ``phi``.

    The orientation comes from the gradient of the bilinear interpolant of
    the vertex values at the segment midpoint, so swapping A and B does not
    change the result.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    coords = np.asarray(coords, dtype=float)
    phi = np.asarray(phi, dtype=float)
    h = coords[1, 0] - coords[0, 0]
    d = B - A
    length = float(np.hypot(*d))
    if length < 1e-14 * h:
        raise ZeroLengthSegment(f"segment length {length:g} below tolerance")
    n = np.array([d[1], -d[0]]) / length
    mid = 0.5 * (A + B)
    side = float(n @ _bilinear_gradient(mid, phi, coords))
    if side == 0.0:
        # fall back to pointing away from the inside vertices
        side = float(n @ (mid - coords[phi < 0].mean(axis=0)))
    return n if side > 0 else -n


def _bilinear_gradient(point, phi, coords):
    h = coords[1, 0] - coords[0, 0]
    s, t = (point - coords[0]) / h
    return np.array([
        (1 - t) * (phi[1] - phi[0]) + t * (phi[2] - phi[3]),
        (1 - s) * (phi[3] - phi[0]) + s * (phi[2] - phi[1]),
    ]) / h


def build_polygon(cell: int, phi, coords, A: EdgeCrossing, B: EdgeCrossing,
                  node_ids=None, h: float | None = None) -> CutPolygon:
    """Inside part of a cut cell as a counterclockwise polygon.

    Walks the cell vertices counterclockwise, keeping inside vertices and
    splicing in A and B on their edges. The walk starts at the inside vertex
    with the smallest node id.
    """
    phi = np.asarray(phi, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if node_ids is None:
        node_ids = tuple(range(4))
    if h is None:
        h = float(coords[1, 0] - coords[0, 0])
    inside = phi < 0
    start = min((k for k in range(4) if inside[k]), key=lambda k: node_ids[k])
    verts = []
    for step in range(4):
        k = (start + step) % 4
        if inside[k]:
            verts.append(coords[k])
        if k == A.edge:
            verts.append(A.point)
        elif k == B.edge:
            verts.append(B.point)
    verts = np.array(verts)
    area = signed_area(verts)
    if area <= 0 or area < MIN_AREA:
        raise DegeneratePolygon(f"cell {cell}: polygon area {area:g}")
    degenerate = False
    try:
        normal = segment_normal(A.point, B.point, phi, coords)
    except ZeroLengthSegment:
        if inside.sum() != 3:
            raise
        # both crossings sit on the lone outside vertex
        degenerate = True
        verts = coords[[(start + step) % 4 for step in range(4)]]
        g = _bilinear_gradient(0.5 * (A.point + B.point), phi, coords)
        if not np.any(g):
            g = coords[~inside][0] - coords.mean(axis=0)
        normal = g / np.hypot(*g)
    return CutPolygon(
        cell=cell,
        vertices=verts,
        boundary_segment=(np.asarray(A.point), np.asarray(B.point)),
        normal=normal,
        interior_node_ids=tuple(int(node_ids[k]) for k in range(4) if inside[k]),
        origin=coords[0].copy(),
        h=float(h),
        degenerate=degenerate,
    )


def cut_polygons(values: NodeValues, grid: Grid, cell_labels=None,
                 allow_unsnapped: bool = False) -> dict[int, CutPolygon]:
    """Polygon of every cut cell, keyed by cell id in ascending order."""
    if cell_labels is None:
        cell_labels = classify_cells(values, grid, allow_unsnapped=allow_unsnapped)
    phi_all = np.asarray(values.values)
    table = grid.cell_vertex_table()
    xy = grid.node_coords()
    out = {}
    for cell in np.flatnonzero(cell_labels == CellLabel.CUT):
        ids = table[cell]
        # coordinates rebuilt from the origin keep every cell an exact square
        origin = xy[ids[0]]
        coords = origin + grid.h * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        phi = phi_all[ids]
        A, B = edge_intersections(phi, coords)
        out[int(cell)] = build_polygon(int(cell), phi, coords, A, B, node_ids=ids, h=grid.h)
    return out


# orthonormal basis of the complement of the constants in R^4
_NONCONST = scipy.linalg.null_space(np.ones((1, 4)))


def trace_ratio(poly: CutPolygon) -> float:
    """Largest ``||d_n v||^2_Gamma / ||grad v||^2_P`` over bilinear ``v`` on the cell.

    The Nitsche form restricted to the cell is positive definite whenever
    the penalty exceeds this ratio.
    """
    if poly.degenerate:
        return 0.0
    A, B = poly.local_segment
    G = normal_derivative_mass(A, B, poly.normal, poly.h)
    K = local_stiffness_matrix(poly)
    Q = _NONCONST
    return float(scipy.linalg.eigh(Q.T @ G @ Q, Q.T @ K @ Q, eigvals_only=True)[-1])
