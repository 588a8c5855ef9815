"""Implicit domain geometry, snapping back to grid, and node/cell labels.

Every level set follows the negative-inside convention:
``phi < 0`` inside the domain, ``phi > 0`` outside, ``phi = 0`` on the
boundary. A nodal value of exactly zero counts as outside.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable

import numpy as np

from .grid import Grid

#: value assigned to snapped nodes (double precision machine epsilon)
SNAP_EPS = float(np.finfo(float).eps)

SQRT3 = np.sqrt(3.0)
SQRT2 = np.sqrt(2.0)


class NodeLabel(IntEnum):
    INACTIVE = 0
    INTERIOR = 1
    GHOST = 2


class CellLabel(IntEnum):
    EXTERIOR = 0
    INTERIOR = 1
    CUT = 2


# ---------------------------------------------------------------------------
# expression trees for user-defined level sets
# ---------------------------------------------------------------------------

class Expr:
    """Node of a level-set expression over the coordinates ``x`` and ``y``.

    Supports ``+ - * /``, integer and real powers, unary minus, and the
    functions :func:`sqrt`, :func:`maximum`, :func:`minimum`.

    >>> r = sqrt((X - 0.5) ** 2 + (Y - 0.5) ** 2)
    >>> float((r - 0.4)(0.5, 0.5))
    -0.4
    """

    def __call__(self, x, y):
        raise NotImplementedError

    def _wrap(self, other):
        return other if isinstance(other, Expr) else Const(float(other))

    def __add__(self, o):
        return BinOp(operator.add, self, self._wrap(o), "+")

    def __radd__(self, o):
        return BinOp(operator.add, self._wrap(o), self, "+")

    def __sub__(self, o):
        return BinOp(operator.sub, self, self._wrap(o), "-")

    def __rsub__(self, o):
        return BinOp(operator.sub, self._wrap(o), self, "-")

    def __mul__(self, o):
        return BinOp(operator.mul, self, self._wrap(o), "*")

    def __rmul__(self, o):
        return BinOp(operator.mul, self._wrap(o), self, "*")

    def __truediv__(self, o):
        return BinOp(operator.truediv, self, self._wrap(o), "/")

    def __rtruediv__(self, o):
        return BinOp(operator.truediv, self._wrap(o), self, "/")

    def __pow__(self, o):
        return BinOp(operator.pow, self, self._wrap(o), "**")

    def __neg__(self):
        return BinOp(operator.mul, Const(-1.0), self, "*")


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float

    def __call__(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, self.value)

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str

    def __call__(self, x, y):
        bx, by = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return (bx if self.name == "x" else by).copy()

    def __repr__(self):
        return self.name


@dataclass(frozen=True, eq=False)
class BinOp(Expr):
    op: Callable
    left: Expr
    right: Expr
    symbol: str

    def __call__(self, x, y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.op(self.left(x, y), self.right(x, y))

    def __repr__(self):
        return f"({self.left!r} {self.symbol} {self.right!r})"


@dataclass(frozen=True, eq=False)
class Func(Expr):
    fn: Callable
    args: tuple
    name: str

    def __call__(self, x, y):
        return self.fn(*(a(x, y) for a in self.args))

    def __repr__(self):
        return f"{self.name}({', '.join(map(repr, self.args))})"


X = Var("x")
Y = Var("y")


def sqrt(e: Expr) -> Expr:
    return Func(np.sqrt, (e,), "sqrt")


def maximum(a: Expr, b: Expr) -> Expr:
    return Func(np.maximum, (a, b), "max")


def minimum(a: Expr, b: Expr) -> Expr:
    return Func(np.minimum, (a, b), "min")


# ---------------------------------------------------------------------------
# level-set fields
# ---------------------------------------------------------------------------

class LevelSet:
    """A signed scalar field on a square region ``box = (lower, upper)``."""

    name = "custom"
    box: tuple[float, float] = (0.0, 1.0)

    def __call__(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x, y, step: float = 1e-6) -> np.ndarray:
        """Central-difference gradient, shape ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = (self(x + step, y) - self(x - step, y)) / (2 * step)
        gy = (self(x, y + step) - self(x, y - step)) / (2 * step)
        return np.stack([gx, gy], axis=-1)

    def grid(self, N: int) -> Grid:
        return Grid.square(self.box[0], self.box[1], N)


@dataclass(frozen=True)
class Circle(LevelSet):
    xc: float = 0.5
    yc: float = 0.5
    r: float = 0.4
    name = "circle"

    def __call__(self, x, y):
        return np.hypot(np.asarray(x, dtype=float) - self.xc, np.asarray(y, dtype=float) - self.yc) - self.r

    def gradient(self, x, y, step=None):
        dx = np.asarray(x, dtype=float) - self.xc
        dy = np.asarray(y, dtype=float) - self.yc
        d = np.hypot(dx, dy)
        d = np.where(d > 0, d, 1.0)
        return np.stack([dx / d, dy / d], axis=-1)


@dataclass(frozen=True)
class Flower(LevelSet):
    """Five-petal star on ``[-1, 1]^2``."""

    xc: float = 0.03 * SQRT3
    yc: float = 0.04 * SQRT2
    name = "flower"
    box = (-1.0, 1.0)

    def __call__(self, x, y):
        X_ = np.asarray(x, dtype=float) - self.xc
        Y_ = np.asarray(y, dtype=float) - self.yc
        R = np.hypot(X_, Y_)
        petals = Y_**5 + 5 * X_**4 * Y_ - 10 * X_**2 * Y_**3
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (R - 0.52 - petals) / (5 * R**5)
        # the field is unbounded below at the centre; keep it finite
        return np.where(R > 0, np.nan_to_num(val, neginf=-np.finfo(float).max), -np.finfo(float).max)


@dataclass(frozen=True)
class Leaf(LevelSet):
    """Intersection of two discs of radius 0.4 centred at (0.4, 0.5), (0.6, 0.5)."""

    name = "leaf"

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p1 = np.hypot(x - 0.4, y - 0.5) - 0.4
        p2 = np.hypot(x - 0.6, y - 0.5) - 0.4
        return np.maximum(p1, p2)


@dataclass(frozen=True)
class Hourglass(LevelSet):
    """Two lobes meeting at a saddle point, on ``[-1, 1]^2``."""

    xc: float = 0.03 * SQRT3
    yc: float = 0.04 * SQRT2
    name = "hourglass"
    box = (-1.0, 1.0)

    def __call__(self, x, y):
        X_ = np.asarray(x, dtype=float) - self.xc
        Y_ = np.asarray(y, dtype=float) - self.yc
        return 256 * Y_**4 - 16 * X_**4 - 128 * Y_**2 + 36 * X_**2


@dataclass(frozen=True)
class Custom(LevelSet):
    expr: Expr
    box: tuple = (0.0, 1.0)
    name = "custom"

    def __call__(self, x, y):
        return np.asarray(self.expr(x, y), dtype=float)


@dataclass(frozen=True)
class Interval1D:
    """The interval ``[a, b]`` inside ``[0, 1]`` as ``phi = max(a - x, x - b)``."""

    a: float
    b: float
    name = "interval"

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(self.a - x, x - self.b)


DOMAINS = {
    "circle": Circle,
    "flower": Flower,
    "leaf": Leaf,
    "hourglass": Hourglass,
    "interval": Interval1D,
}


def by_name(name: str, **params):
    try:
        cls = DOMAINS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; expected one of {sorted(DOMAINS)}") from None
    return cls(**params)


def evaluate(field, point):
    """Evaluate a level set at one point (a scalar, or an ``(x, y)`` pair)."""
    if isinstance(field, Interval1D):
        return float(field(point))
    x, y = point
    return float(field(x, y))


# ---------------------------------------------------------------------------
# nodal samples, snapping, classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeValues:
    values: np.ndarray
    snapped: bool = False
    alpha_snap: float | None = None

    @classmethod
    def sample(cls, field: LevelSet, grid: Grid) -> "NodeValues":
        xy = grid.node_coords()
        return cls(np.asarray(field(xy[:, 0], xy[:, 1]), dtype=float))


def snap_to_grid(values: NodeValues, h: float, alpha_snap: float) -> NodeValues:
    """Push nodes lying just inside the boundary to the outside.

    Every node with ``-h**alpha_snap < phi < 0`` gets ``phi = SNAP_EPS``.
    Applying the operation twice is the same as applying it once.
    """
    if h <= 0 or alpha_snap <= 0:
        raise ValueError("h and alpha_snap must be positive")
    phi = np.array(values.values, dtype=float, copy=True)
    hit = (phi < 0) & (np.abs(phi) < h**alpha_snap)
    phi[hit] = SNAP_EPS
    return NodeValues(phi, snapped=True, alpha_snap=alpha_snap)


def _require_snapped(values: NodeValues, allow_unsnapped: bool) -> None:
    if not (values.snapped or allow_unsnapped):
        raise ValueError("node values are not snapped; pass allow_unsnapped=True to opt out")


def classify_nodes(values: NodeValues, grid: Grid, allow_unsnapped: bool = False) -> np.ndarray:
    """Label nodes as interior (phi < 0), ghost, or inactive.

    A ghost node is outside but has an interior node among its eight
    neighbours.
    """
    _require_snapped(values, allow_unsnapped)
    inside = (np.asarray(values.values) < 0).reshape(grid.shape)
    padded = np.pad(inside, 1, constant_values=False)
    near = np.zeros_like(inside)
    n0, n1 = inside.shape
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if di or dj:
                near |= padded[1 + dj:1 + dj + n0, 1 + di:1 + di + n1]
    labels = np.full(inside.shape, NodeLabel.INACTIVE, dtype=np.int8)
    labels[~inside & near] = NodeLabel.GHOST
    labels[inside] = NodeLabel.INTERIOR
    return labels.ravel()


def classify_cells(values: NodeValues, grid: Grid, allow_unsnapped: bool = False) -> np.ndarray:
    """Label cells interior (all four vertices inside), exterior (none), or cut."""
    _require_snapped(values, allow_unsnapped)
    inside = np.asarray(values.values)[grid.cell_vertex_table()] < 0
    count = inside.sum(axis=1)
    labels = np.full(grid.n_cells, CellLabel.CUT, dtype=np.int8)
    labels[count == 4] = CellLabel.INTERIOR
    labels[count == 0] = CellLabel.EXTERIOR
    return labels
