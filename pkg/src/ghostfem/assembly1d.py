"""1D Nitsche systems on ``[a, b]`` inside ``[0, 1]`` from closed-form entries.

Nodes are ``x_i = i h`` with ``h = 1/N``. The left end ``a`` lies in cell
``[x_lo, x_lo+1]`` and the right end ``b`` in ``[x_hi-1, x_hi]``, with

    theta1 = 1 - (a - x_lo) / h,    theta2 = 1 - (x_hi - b) / h,

so the default ``lo = 0``, ``hi = N`` gives ``theta1 = 1 - a/h`` and
``theta2 = 1 - (1 - b)/h``. Snapping can move the ends to other cells, in
which case ``lo`` and ``hi`` shift and the nodes outside ``[lo, hi]`` become
inactive (identity rows).

Dirichlet: ``A = S + S_T + lam_a P_a + lam_b P_b``,
``F = M f + (D_a + lam_a P_a) u_a + (lam_b P_b - D_b) u_b``.
Mixed (Dirichlet at a, Neumann at b): ``A = S + S_T_a + lam_a P_a``,
``F = M f + (D_a + lam_a P_a) u_a + N_b g_b``.
Both penalties equal ``lam`` unless the robust floor of
:func:`end_penalties` raises one of them.
The scalar data ``u_a``, ``u_b``, ``g_b`` multiply the blocks as constant
vectors, so e.g. ``P_a u_a`` has entries ``u_a phi_i(a)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .levelset import Interval1D, NodeValues, snap_to_grid
from .linalg import SparseSystem


class InvalidTheta(ValueError):
    pass


@dataclass(frozen=True)
class Interval1DSetup:
    N: int
    a: float
    b: float
    lam: float
    lo: int = 0
    hi: int | None = None

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"N must be at least 4, got {self.N}")
        if self.hi is None:
            object.__setattr__(self, "hi", self.N)
        if not self.lam > 0:
            raise ValueError("penalty must be positive")
        if not (0 <= self.lo and self.hi <= self.N and self.hi - self.lo >= 3):
            raise ValueError(f"need 0 <= lo < hi - 2 <= N - 2, got lo={self.lo}, hi={self.hi}")
        h = self.h
        tol = 1e-12 * h
        if not (self.lo * h - tol <= self.a <= (self.lo + 1) * h + tol):
            raise InvalidTheta(f"a = {self.a} outside [{self.lo * h}, {(self.lo + 1) * h}]")
        if not ((self.hi - 1) * h - tol <= self.b <= self.hi * h + tol):
            raise InvalidTheta(f"b = {self.b} outside [{(self.hi - 1) * h}, {self.hi * h}]")

    @classmethod
    def from_thetas(cls, N: int, theta1: float, theta2: float, lam: float | None = None,
                    alpha: float = 2.0) -> "Interval1DSetup":
        h = 1.0 / N
        if not (0 <= theta1 <= 1 and 0 <= theta2 <= 1):
            raise InvalidTheta(f"thetas must lie in [0, 1], got {theta1}, {theta2}")
        return cls(N, (1 - theta1) * h, 1 - (1 - theta2) * h, h ** -alpha if lam is None else lam)

    @classmethod
    def from_levelset(cls, interval: Interval1D, N: int, alpha: float = 2.0,
                      alpha_snap: float | None = 2.0, lam: float | None = None) -> "Interval1DSetup":
        """Setup for the snapped interval.

        Nodal values of ``phi = max(a - x, x - b)`` are snapped with
        ``h**alpha_snap`` (``None`` skips snapping), and the ends are
        recovered from the linear interpolant of the nodal values on the cut
        cells. With ``alpha_snap = alpha`` every remaining cut fraction
        satisfies ``theta h >= h**alpha``, i.e. ``lam theta h >= 1``, which
        keeps the first diagonal entry of the Dirichlet matrix non-negative.
        """
        h = 1.0 / N
        x = np.arange(N + 1) * h
        phi = interval(x)
        if alpha_snap is not None:
            phi = snap_to_grid(NodeValues(phi), h, alpha_snap).values
        inside = np.flatnonzero(phi < 0)
        if inside.size == 0:
            raise InvalidTheta("no grid node lies inside the interval")
        first, last = inside[0], inside[-1]
        if first == 0 or last == N:
            raise InvalidTheta("the interval must not reach the ends of [0, 1]")
        lo, hi = first - 1, last + 1
        a = x[lo] + h * phi[lo] / (phi[lo] - phi[first])
        b = x[last] + h * phi[last] / (phi[last] - phi[hi])
        return cls(N, float(a), float(b), h ** -alpha if lam is None else lam, int(lo), int(hi))

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def theta1(self) -> float:
        return float(np.clip(1 - (self.a - self.lo * self.h) / self.h, 0.0, 1.0))

    @property
    def theta2(self) -> float:
        return float(np.clip(1 - (self.hi * self.h - self.b) / self.h, 0.0, 1.0))

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.h

    @property
    def active(self) -> np.ndarray:
        idx = np.arange(self.N + 1)
        return (idx >= self.lo) & (idx <= self.hi)


@dataclass
class Blocks1D:
    S: np.ndarray
    M: np.ndarray
    S_T_a: np.ndarray
    S_T_b: np.ndarray
    P_a: np.ndarray
    P_b: np.ndarray
    D_a: np.ndarray
    D_b: np.ndarray
    N_b: np.ndarray

    @property
    def S_T(self) -> np.ndarray:
        return self.S_T_a + self.S_T_b


def traces(setup: Interval1DSetup):
    """Basis values and derivatives at a and b, each of length N + 1."""
    n = setup.N + 1
    h, t1, t2 = setup.h, setup.theta1, setup.theta2
    lo, hi = setup.lo, setup.hi
    ta, da, tb, db = (np.zeros(n) for _ in range(4))
    ta[lo], ta[lo + 1] = t1, 1 - t1
    da[lo], da[lo + 1] = -1 / h, 1 / h
    tb[hi], tb[hi - 1] = t2, 1 - t2
    db[hi], db[hi - 1] = 1 / h, -1 / h
    return ta, da, tb, db


def build_blocks_1d(setup: Interval1DSetup) -> Blocks1D:
    n = setup.N + 1
    h, t1, t2 = setup.h, setup.theta1, setup.theta2
    i0, i1, j1, j0 = setup.lo, setup.lo + 1, setup.hi - 1, setup.hi

    S = np.zeros((n, n))
    M = np.zeros((n, n))
    for i in range(i1, j1):
        # full cells [x_i, x_i+1]
        S[i, i] += 1 / h
        S[i + 1, i + 1] += 1 / h
        S[i, i + 1] = S[i + 1, i] = -1 / h
        M[i, i] += h / 3
        M[i + 1, i + 1] += h / 3
        M[i, i + 1] = M[i + 1, i] = h / 6
    # cut cell at a
    S[i0, i0] = t1 / h
    S[i0, i1] = S[i1, i0] = -t1 / h
    S[i1, i1] = (1 + t1) / h
    M[i0, i0] = h * t1**3 / 3
    M[i0, i1] = M[i1, i0] = h * (t1**2 / 2 - t1**3 / 3)
    M[i1, i1] = h * ((1 + t1**3) / 3 - t1**2 + t1)
    # cut cell at b
    S[j1, j1] = (1 + t2) / h
    S[j1, j0] = S[j0, j1] = -t2 / h
    S[j0, j0] = t2 / h
    M[j1, j1] = h * ((1 + t2**3) / 3 - t2**2 + t2)
    M[j1, j0] = M[j0, j1] = h * (t2**2 / 2 - t2**3 / 3)
    M[j0, j0] = h * t2**3 / 3

    ta, da, tb, db = traces(setup)
    return Blocks1D(
        S=S,
        M=M,
        S_T_a=np.outer(ta, da) + np.outer(da, ta),
        S_T_b=-(np.outer(tb, db) + np.outer(db, tb)),
        P_a=np.outer(ta, ta),
        P_b=np.outer(tb, tb),
        D_a=np.outer(da, ta),
        D_b=np.outer(db, tb),
        N_b=np.outer(tb, tb),
    )


PENALTY_MODES = ("robust", "uniform")
ROBUST_MARGIN = 2.0


def end_penalties(setup: Interval1DSetup, mode: str = "robust",
                  margin: float = ROBUST_MARGIN) -> tuple[float, float]:
    """Penalties ``(lam_a, lam_b)`` at the two ends.

    ``"uniform"`` uses ``setup.lam`` at both ends. ``"robust"`` raises an
    end's penalty to ``margin / (theta h)`` when that is larger, where
    ``1 / (theta h)`` is the largest ratio ``v'(a)**2 / |v|**2`` over linear
    ``v`` on the cut cell; this keeps the matrix positive definite for any
    cut fraction.
    """
    if mode not in PENALTY_MODES:
        raise ValueError(f"penalty mode must be one of {PENALTY_MODES}, got {mode!r}")
    lam = setup.lam
    if mode == "uniform":
        return lam, lam
    out = []
    for theta in (setup.theta1, setup.theta2):
        out.append(max(lam, margin / (theta * setup.h)) if theta > 0 else lam)
    return out[0], out[1]


def _finish(setup: Interval1DSetup, A: np.ndarray, F: np.ndarray) -> SparseSystem:
    active = setup.active
    A = A.copy()
    A[~active, :] = 0.0
    A[:, ~active] = 0.0
    A[~active, ~active] = 1.0
    F = np.where(active, F, 0.0)
    mat = sp.csr_matrix(A)
    mat.eliminate_zeros()
    mat.sort_indices()
    return SparseSystem(mat, F, active)


def assemble_dirichlet_1d(setup: Interval1DSetup, f, u_a: float, u_b: float,
                          blocks: Blocks1D | None = None, penalty_mode: str = "robust") -> SparseSystem:
    """``f`` holds nodal samples at all ``N + 1`` nodes."""
    B = blocks or build_blocks_1d(setup)
    lam_a, lam_b = end_penalties(setup, penalty_mode)
    one = np.ones(setup.N + 1)
    A = B.S + B.S_T + lam_a * B.P_a + lam_b * B.P_b
    F = B.M @ np.asarray(f, dtype=float) + (B.D_a + lam_a * B.P_a) @ (u_a * one) \
        + (lam_b * B.P_b - B.D_b) @ (u_b * one)
    return _finish(setup, A, F)


def assemble_mixed_1d(setup: Interval1DSetup, f, u_a: float, g_b: float,
                      blocks: Blocks1D | None = None, penalty_mode: str = "robust") -> SparseSystem:
    """Dirichlet value ``u_a`` at a and outward flux ``g_b = u'(b)`` at b."""
    B = blocks or build_blocks_1d(setup)
    lam_a, _ = end_penalties(setup, penalty_mode)
    one = np.ones(setup.N + 1)
    A = B.S + B.S_T_a + lam_a * B.P_a
    F = B.M @ np.asarray(f, dtype=float) + (B.D_a + lam_a * B.P_a) @ (u_a * one) + B.N_b @ (g_b * one)
    return _finish(setup, A, F)
