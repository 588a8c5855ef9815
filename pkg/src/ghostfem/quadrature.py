"""Exact integration of bilinear-basis products on cut cells.

Area integrals are turned into boundary integrals with the divergence
theorem: for ``F`` the x-primitive of ``f``,

    int_P f dx dy = sum over polygon edges of int_edge F dy,

and each edge integral is evaluated with 3-point Gauss-Legendre, which is
exact for parameter degree <= 5. Local products of bilinear hats have total
degree <= 4, so their primitives stay within that bound.

All polynomials live in cell-local coordinates ``(s, t) in [0, 1]^2`` with
``x = x0 + h*s`` and ``y = y0 + h*t``. Local basis indices follow the grid's
vertex order: 0 lower-left, 1 lower-right, 2 upper-right, 3 upper-left.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

MAX_DEGREE = 5

GAUSS3_NODES = np.array([(1 - np.sqrt(3 / 5)) / 2, 0.5, (1 + np.sqrt(3 / 5)) / 2])
GAUSS3_WEIGHTS = np.array([5 / 18, 4 / 9, 5 / 18])


class DegreeTooHigh(ValueError):
    pass


@dataclass(frozen=True)
class EdgeRule:
    """3-point Gauss-Legendre on [0, 1]."""

    nodes: np.ndarray = GAUSS3_NODES
    weights: np.ndarray = GAUSS3_WEIGHTS


class BivariatePolynomial:
    """``sum c[p, q] s**p t**q`` with ``p, q <= MAX_DEGREE``."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        c = np.zeros((MAX_DEGREE + 1, MAX_DEGREE + 1))
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        if coef.shape[0] > MAX_DEGREE + 1 or coef.shape[1] > MAX_DEGREE + 1:
            if np.any(coef[MAX_DEGREE + 1:, :]) or np.any(coef[:, MAX_DEGREE + 1:]):
                raise DegreeTooHigh(f"coefficient block {coef.shape} exceeds degree {MAX_DEGREE}")
            coef = coef[:MAX_DEGREE + 1, :MAX_DEGREE + 1]
        c[:coef.shape[0], :coef.shape[1]] = coef
        self.coef = c

    @classmethod
    def constant(cls, value: float) -> "BivariatePolynomial":
        return cls([[value]])

    @classmethod
    def s(cls) -> "BivariatePolynomial":
        return cls([[0.0], [1.0]])

    @classmethod
    def t(cls) -> "BivariatePolynomial":
        return cls([[0.0, 1.0]])

    def degree(self) -> tuple[int, int]:
        nz = np.argwhere(self.coef != 0)
        if nz.size == 0:
            return (0, 0)
        return int(nz[:, 0].max()), int(nz[:, 1].max())

    def total_degree(self) -> int:
        nz = np.argwhere(self.coef != 0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def __call__(self, s, t):
        return npoly.polyval2d(s, t, self.coef)

    def __add__(self, other):
        other = other if isinstance(other, BivariatePolynomial) else BivariatePolynomial.constant(other)
        return BivariatePolynomial(self.coef + other.coef)

    __radd__ = __add__

    def __sub__(self, other):
        other = other if isinstance(other, BivariatePolynomial) else BivariatePolynomial.constant(other)
        return BivariatePolynomial(self.coef - other.coef)

    def __rsub__(self, other):
        return BivariatePolynomial.constant(other) - self

    def __neg__(self):
        return BivariatePolynomial(-self.coef)

    def __mul__(self, other):
        if not isinstance(other, BivariatePolynomial):
            return BivariatePolynomial(self.coef * float(other))
        n = 2 * MAX_DEGREE + 1
        out = np.zeros((n, n))
        for p, q in np.argwhere(self.coef != 0):
            out[p:p + MAX_DEGREE + 1, q:q + MAX_DEGREE + 1] += self.coef[p, q] * other.coef
        return BivariatePolynomial(out)

    __rmul__ = __mul__

    def primitive_s(self) -> "BivariatePolynomial":
        """x-primitive vanishing at ``s = 0``."""
        if np.any(self.coef[MAX_DEGREE, :]):
            raise DegreeTooHigh("x-primitive exceeds the degree cap")
        out = np.zeros_like(self.coef)
        p = np.arange(1, MAX_DEGREE + 1)[:, None]
        out[1:, :] = self.coef[:-1, :] / p
        return BivariatePolynomial(out)

    def deriv_s(self) -> "BivariatePolynomial":
        p = np.arange(1, MAX_DEGREE + 1)[:, None]
        return BivariatePolynomial(self.coef[1:, :] * p)

    def deriv_t(self) -> "BivariatePolynomial":
        q = np.arange(1, MAX_DEGREE + 1)[None, :]
        return BivariatePolynomial(self.coef[:, 1:] * q)

    def __repr__(self):
        terms = [f"{c:+g}*s^{p}*t^{q}" for (p, q), c in np.ndenumerate(self.coef) if c]
        return "BivariatePolynomial(" + (" ".join(terms) or "0") + ")"


def _bilinear_basis() -> list[BivariatePolynomial]:
    s, t = BivariatePolynomial.s(), BivariatePolynomial.t()
    return [(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t]


BASIS = _bilinear_basis()
BASIS_GRAD = [(b.deriv_s(), b.deriv_t()) for b in BASIS]

# Primitives of the 16 mass and 16 stiffness integrands, stacked as
# coefficient tensors of shape (4, 4, 6, 6) for vectorised evaluation.
_MASS_PRIM = np.array([[(BASIS[i] * BASIS[j]).primitive_s().coef for j in range(4)] for i in range(4)])
_STIFF_PRIM = np.array([
    [(BASIS_GRAD[i][0] * BASIS_GRAD[j][0] + BASIS_GRAD[i][1] * BASIS_GRAD[j][1]).primitive_s().coef
     for j in range(4)]
    for i in range(4)
])
_POWERS = np.arange(MAX_DEGREE + 1)


def gauss3_segment(F: BivariatePolynomial, p0, p1) -> float:
    """``int F dy`` along the straight segment ``p0 -> p1``."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pts = p0 + GAUSS3_NODES[:, None] * (p1 - p0)
    return float(GAUSS3_WEIGHTS @ F(pts[:, 0], pts[:, 1]) * (p1[1] - p0[1]))


def polygon_integral(f: BivariatePolynomial, vertices) -> float:
    """Exact ``int_P f`` over a counterclockwise polygon (local coordinates)."""
    if f.total_degree() > MAX_DEGREE - 1:
        raise DegreeTooHigh(f"total degree {f.total_degree()} > {MAX_DEGREE - 1}")
    F = f.primitive_s()
    v = np.asarray(vertices, dtype=float)
    return sum(gauss3_segment(F, v[r], v[(r + 1) % len(v)]) for r in range(len(v)))


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def edge_quadrature(vertices) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points and ``w * dy`` weights for the divergence-theorem rule."""
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    pts = v[:, None, :] + GAUSS3_NODES[None, :, None] * d[:, None, :]
    wts = GAUSS3_WEIGHTS[None, :] * d[:, 1:2]
    return pts.reshape(-1, 2), wts.ravel()


def _eval_stack(coefs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    Vs = pts[:, 0:1] ** _POWERS
    Vt = pts[:, 1:2] ** _POWERS
    return np.einsum("ijpq,np,nq->ijn", coefs, Vs, Vt)


def _local_vertices(poly) -> np.ndarray:
    if poly is None:
        return UNIT_SQUARE
    if hasattr(poly, "local_vertices"):
        return poly.local_vertices
    return np.asarray(poly, dtype=float)


def local_mass_matrix(poly, h: float) -> np.ndarray:
    """4 x 4 matrix of ``int_P phi_i phi_j`` in physical units.

    ``poly`` is a :class:`~ghostfem.geometry.CutPolygon`, an array of local
    vertices, or ``None`` for the full cell.
    """
    pts, w = edge_quadrature(_local_vertices(poly))
    return h * h * (_eval_stack(_MASS_PRIM, pts) @ w)


def local_stiffness_matrix(poly, h: float = 1.0) -> np.ndarray:
    """4 x 4 matrix of ``int_P grad phi_i . grad phi_j`` (independent of h)."""
    pts, w = edge_quadrature(_local_vertices(poly))
    return _eval_stack(_STIFF_PRIM, pts) @ w


def local_mass(poly, i: int, j: int, h: float) -> float:
    return float(local_mass_matrix(poly, h)[i, j])


def local_stiffness(poly, i: int, j: int, h: float = 1.0) -> float:
    return float(local_stiffness_matrix(poly, h)[i, j])


def basis_values(pts) -> np.ndarray:
    """Local basis values at local points, shape ``(4, npts)``."""
    s, t = np.asarray(pts, dtype=float).T
    return np.array([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t])


def basis_gradients(pts, h: float) -> np.ndarray:
    """Physical gradients of the local basis, shape ``(4, npts, 2)``."""
    s, t = np.asarray(pts, dtype=float).T
    gs = np.array([-(1 - t), 1 - t, t, -t])
    gt = np.array([-(1 - s), -s, s, 1 - s])
    return np.stack([gs, gt], axis=-1) / h


class ZeroLengthSegment(ValueError):
    pass


def segment_points(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return A + GAUSS3_NODES[:, None] * (B - A)


def boundary_matrices(A, B, normal, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Mass and flux matrices on a boundary segment.

    ``A`` and ``B`` are local coordinates; ``normal`` is the unit outward
    normal. Returns ``(mass, flux)`` with ``mass[i, j] = int phi_i phi_j dl``
    and ``flux[i, j] = int (n . grad phi_j) phi_i dl``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    length = h * np.hypot(*(B - A))
    if length < 1e-14 * h:
        raise ZeroLengthSegment(f"segment length {length:g} below tolerance")
    pts = segment_points(A, B)
    phi = basis_values(pts)
    dn = basis_gradients(pts, h) @ np.asarray(normal, dtype=float)
    w = GAUSS3_WEIGHTS * length
    mass = (phi * w) @ phi.T
    flux = (phi * w) @ dn.T
    return mass, flux


def normal_derivative_mass(A, B, normal, h: float) -> np.ndarray:
    """``int (n . grad phi_i)(n . grad phi_j) dl`` on a boundary segment."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    pts = segment_points(A, B)
    dn = basis_gradients(pts, h) @ np.asarray(normal, dtype=float)
    w = GAUSS3_WEIGHTS * h * np.hypot(*(B - A))
    return (dn * w) @ dn.T


def boundary_products(segment, normal, i: int, j: int, h: float) -> tuple[float, float, float]:
    """``(mass, flux, symmetric flux)`` entries for local basis pair ``(i, j)``."""
    mass, flux = boundary_matrices(segment[0], segment[1], normal, h)
    return float(mass[i, j]), float(flux[i, j]), float(flux[j, i])
