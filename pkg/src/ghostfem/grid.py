"""Regular square grid over an axis-aligned square region.

Nodes and cells are numbered row-major from the lower-left corner:
node ``(i, j)`` has id ``j * (N + 1) + i`` and cell ``(i, j)`` has id
``j * N + i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """N x N square cells covering ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float
    N: int
    h: float = field(init=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be positive, got {self.N}")
        wx, wy = self.x1 - self.x0, self.y1 - self.y0
        if wx <= 0 or wy <= 0:
            raise ValueError("empty rectangle")
        if not np.isclose(wx, wy, rtol=1e-14, atol=0.0):
            raise ValueError(f"cells must be square: got {wx} x {wy} region")
        object.__setattr__(self, "h", wx / self.N)

    @classmethod
    def square(cls, lower: float, upper: float, N: int) -> "Grid":
        return cls(lower, lower, upper, upper, N)

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** 2

    @property
    def n_cells(self) -> int:
        return self.N * self.N

    @property
    def shape(self) -> tuple[int, int]:
        """Node array shape as ``(rows, cols)`` = ``(ny, nx)``."""
        return (self.N + 1, self.N + 1)

    def node_coord(self, node: int) -> tuple[float, float]:
        if not 0 <= node < self.n_nodes:
            raise IndexError(f"node id {node} out of range [0, {self.n_nodes})")
        j, i = divmod(node, self.N + 1)
        return (self.x0 + i * self.h, self.y0 + j * self.h)

    def node_id(self, i: int, j: int) -> int:
        if not (0 <= i <= self.N and 0 <= j <= self.N):
            raise IndexError(f"lattice index ({i}, {j}) out of range")
        return j * (self.N + 1) + i

    def node_coords(self) -> np.ndarray:
        """All node coordinates, shape ``(n_nodes, 2)``."""
        idx = np.arange(self.N + 1)
        xs = self.x0 + idx * self.h
        ys = self.y0 + idx * self.h
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_vertices(self, cell: int) -> tuple[int, int, int, int]:
        """Node ids of a cell, counterclockwise from the lower-left."""
        if not 0 <= cell < self.n_cells:
            raise IndexError(f"cell id {cell} out of range [0, {self.n_cells})")
        j, i = divmod(cell, self.N)
        ll = j * (self.N + 1) + i
        return (ll, ll + 1, ll + self.N + 2, ll + self.N + 1)

    def cell_vertex_table(self) -> np.ndarray:
        """Vertex ids of every cell, shape ``(n_cells, 4)``."""
        j, i = np.divmod(np.arange(self.n_cells), self.N)
        ll = j * (self.N + 1) + i
        return np.column_stack([ll, ll + 1, ll + self.N + 2, ll + self.N + 1])

    def cell_origin(self, cell: int) -> np.ndarray:
        j, i = divmod(cell, self.N)
        return np.array([self.x0 + i * self.h, self.y0 + j * self.h])

    def locate(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell ids and cell-local coordinates in ``[0, 1]^2`` of points in R."""
        sx = (np.asarray(x, dtype=float) - self.x0) / self.h
        sy = (np.asarray(y, dtype=float) - self.y0) / self.h
        i = np.clip(np.floor(sx).astype(int), 0, self.N - 1)
        j = np.clip(np.floor(sy).astype(int), 0, self.N - 1)
        return j * self.N + i, sx - i, sy - j
