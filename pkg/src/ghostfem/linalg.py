"""Sparse symmetric systems: Jacobi-preconditioned CG and conditioning.

Matrices are :class:`scipy.sparse.csr_matrix` with sorted, duplicate-free
column indices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NoConvergence(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NonPositive(ArithmeticError):
    """The matrix is not positive definite on the requested block."""


def csr_from_triplets(rows, cols, vals, n: int) -> sp.csr_matrix:
    """CSR matrix summing duplicate triplets in the order given."""
    A = sp.coo_matrix((np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.matrix.shape[0], dtype=bool)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        """``||A - A^T||_F / ||A||_F``."""
        A = self.matrix
        return float(sp.linalg.norm(A - A.T) / sp.linalg.norm(A))


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None,
       debug: bool = False, raise_on_failure: bool = True) -> CGResult:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||b - A x||_2 <= tol * ||b||_2``. Raises
    :class:`NonPositive` on non-positive curvature ``p^T A p <= 0`` and
    :class:`NoConvergence` after ``max_iter`` iterations.

    With ``debug=True`` the energy ``x^T A x / 2 - b^T x`` is checked to be
    non-increasing at every step.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise NonPositive("non-positive diagonal entry; Jacobi preconditioner undefined")
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True)
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return CGResult(x, 0, rnorm / bnorm, True)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    energy = 0.5 * x @ (A @ x) - b @ x if debug else None
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NonPositive(f"non-positive curvature p^T A p = {pAp:g} at iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if debug:
            e_new = 0.5 * x @ (A @ x) - b @ x
            assert e_new <= energy + 1e-12 * max(1.0, abs(energy)), "CG energy increased"
            energy = e_new
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            rnorm = np.linalg.norm(b - A @ x)
            if rnorm <= target:
                return CGResult(x, k, rnorm / bnorm, True)
            r = b - A @ x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if raise_on_failure:
        raise NoConvergence(f"CG did not converge in {max_iter} iterations; "
                            f"relative residual {rnorm / bnorm:.3e}", rnorm / bnorm, max_iter)
    return CGResult(x, max_iter, rnorm / bnorm, False)


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None) -> np.ndarray:
    return cg(A, b, tol=tol, max_iter=max_iter).x


def dense_solve(A, b) -> np.ndarray:
    """Direct dense solve for small systems (test oracle)."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if A.shape[0] > 2000:
        raise ValueError("dense_solve is limited to n <= 2000")
    return scipy.linalg.solve(A, np.asarray(b, dtype=float), assume_a="sym")


def direct_solve(A, b) -> np.ndarray:
    return spla.spsolve(sp.csc_matrix(A), np.asarray(b, dtype=float))


def _active_block(A, active):
    A = sp.csr_matrix(A)
    if active is None:
        return A
    idx = np.flatnonzero(active)
    return A[idx][:, idx].tocsr()


def _power_lambda_max(A, rtol, max_iter, rng):
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if lam_new > 0 and abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    log.warning("power iteration reached %d iterations (last estimate %.6g)", max_iter, lam)
    return lam


def _inverse_lambda_min(A, rtol, max_iter, rng, inner, inner_tol, deflate=None):
    n = A.shape[0]
    if inner == "lu":
        lu = _symmetric_lu(A)
        if lu is None:
            lu = spla.splu(sp.csc_matrix(A))
        else:
            # inverse iteration finds the eigenvalue of smallest magnitude,
            # so indefiniteness has to be read off the pivots; a deflated
            # kernel vector shows up as one pivot at roundoff level, which
            # may carry either sign
            d = lu.U.diagonal()
            bad = d <= 0
            if deflate is not None and bad.any():
                k = np.argmin(np.abs(d))
                if abs(d[k]) <= 1e-10 * np.abs(d).max():
                    bad[k] = False
            if bad.any():
                raise NonPositive(f"{int(bad.sum())} non-positive pivots")
        solve = lu.solve
    else:
        def solve(rhs):
            return cg(A, rhs, tol=inner_tol, max_iter=20 * n).x
    v = rng.standard_normal(n)
    if deflate is not None:
        v -= deflate * (deflate @ v)
    v /= np.linalg.norm(v)
    lam = np.inf
    for _ in range(max_iter):
        w = solve(v)
        if deflate is not None:
            w -= deflate * (deflate @ w)
        nw = np.linalg.norm(w)
        v = w / nw
        lam_new = float(v @ (A @ v))
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    log.warning("inverse iteration reached %d iterations (last estimate %.6g)", max_iter, lam)
    return lam


def extreme_eigenvalues(A, active=None, rtol: float = 1e-6, max_iter: int = 20000,
                        inner: str = "cg", inner_tol: float = 1e-10, seed: int = 0,
                        deflate=None) -> tuple[float, float]:
    """``(lambda_min, lambda_max)`` of the symmetric active block.

    ``lambda_max`` comes from power iteration, ``lambda_min`` from inverse
    iteration whose inner solves use CG (``inner="cg"``) or a sparse LU
    factorisation (``inner="lu"``). Either way a matrix that is not positive
    definite raises :class:`NonPositive`: CG meets non-positive curvature,
    and the LU route checks the signs of its diagonal pivots. ``deflate`` is an optional unit vector
    (in active-block indexing) to project out, e.g. the constants of a pure
    Neumann operator.
    """
    B = _active_block(A, active)
    rng = np.random.default_rng(seed)
    lam_max = _power_lambda_max(B, rtol, max_iter, rng)
    try:
        lam_min = _inverse_lambda_min(B, rtol, 200, rng, inner, inner_tol, deflate)
    except NonPositive as exc:
        raise NonPositive(f"matrix is not positive definite: {exc}") from exc
    return lam_min, lam_max


def cond_estimate(A, active=None, **kwargs) -> float:
    """Spectral condition number ``lambda_max / lambda_min`` of the active block."""
    lam_min, lam_max = extreme_eigenvalues(A, active, **kwargs)
    if lam_min <= 0:
        raise NonPositive(f"smallest eigenvalue estimate {lam_min:g} is not positive")
    return lam_max / lam_min


def _symmetric_lu(A):
    """Sparse LU with diagonal pivots only, or ``None`` if that was not possible."""
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError:
        return None
    return lu if np.array_equal(lu.perm_r, lu.perm_c) else None


def negative_pivots(A, active=None) -> int:
    """Number of negative eigenvalues of the symmetric active block.

    Uses a symmetric LDL^T factorisation (Sylvester's law of inertia), so a
    return value of 0 certifies positive semi-definiteness.
    """
    B = _active_block(A, active)
    n = B.shape[0]
    if n <= 2000:
        _, d, _ = scipy.linalg.ldl(B.toarray())
        return int(np.sum(np.linalg.eigvalsh(d) < 0))
    lu = _symmetric_lu(B)
    if lu is None:
        raise RuntimeError("factorisation used off-diagonal pivots; inertia unavailable")
    return int(np.sum(lu.U.diagonal() < 0))
