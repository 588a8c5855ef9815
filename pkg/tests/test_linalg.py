import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ghostfem.assembly2d import Discretization, assemble, solve
from ghostfem.levelset import Circle
from ghostfem.linalg import (NoConvergence, NonPositive, SparseSystem, cg, cg_solve, cond_estimate,
                             csr_from_triplets, dense_solve, direct_solve, extreme_eigenvalues,
                             negative_pivots)
from ghostfem.problems import manufactured_spec


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_cg_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    res = cg(sp.identity(3, format="csr"), b)
    np.testing.assert_allclose(res.x, b)
    assert res.iterations == 1 and res.converged


def test_cg_two_by_two():
    A = sp.csr_matrix([[2.0, -1.0], [-1.0, 2.0]])
    x = cg_solve(A, np.array([1.0, 1.0]))
    np.testing.assert_allclose(x, dense_solve(A, [1.0, 1.0]), atol=1e-12)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)


def test_cg_residual_target_and_zero_rhs():
    A = laplacian_1d(50)
    b = np.random.default_rng(0).standard_normal(50)
    res = cg(A, b, tol=1e-11)
    assert np.linalg.norm(b - A @ res.x) <= 1e-11 * np.linalg.norm(b)
    assert cg(A, np.zeros(50)).iterations == 0


def test_cg_failures():
    with pytest.raises(NonPositive):
        cg(sp.csr_matrix(np.diag([1.0, -1.0])), np.ones(2))
    indefinite = sp.csr_matrix([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NonPositive):
        cg(indefinite, np.array([1.0, 0.0]))
    with pytest.raises(NoConvergence) as info:
        cg(laplacian_1d(200), np.ones(200), max_iter=3)
    assert info.value.iterations == 3 and info.value.residual > 0
    res = cg(laplacian_1d(200), np.ones(200), max_iter=3, raise_on_failure=False)
    assert not res.converged


def test_cg_debug_energy_monotone():
    A = laplacian_1d(40) + sp.identity(40) * 0.01
    cg(A.tocsr(), np.random.default_rng(1).standard_normal(40), debug=True)


@settings(max_examples=20)
@given(st.integers(5, 40), st.integers(0, 1000))
def test_cg_permutation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    A = laplacian_1d(n) + sp.diags(rng.uniform(0.1, 1.0, n))
    b = rng.standard_normal(n)
    perm = rng.permutation(n)
    x = cg_solve(A.tocsr(), b, tol=1e-14)
    Ap = A.tocsr()[perm][:, perm]
    xp = cg_solve(Ap, b[perm], tol=1e-14)
    np.testing.assert_allclose(xp, x[perm], atol=1e-12 * max(1, np.abs(x).max()))


def test_cond_examples():
    assert cond_estimate(sp.diags([1.0, 4.0]).tocsr()) == pytest.approx(4.0, rel=1e-6)
    A = laplacian_1d(3)
    ev = np.linalg.eigvalsh(A.toarray())
    assert ev[-1] / ev[0] == pytest.approx((2 + np.sqrt(2)) / (2 - np.sqrt(2)))
    assert cond_estimate(A) == pytest.approx(ev[-1] / ev[0], rel=1e-4)
    A = laplacian_1d(4)
    ev = np.linalg.eigvalsh(A.toarray())
    assert cond_estimate(A) == pytest.approx(ev[-1] / ev[0], rel=1e-4)
    assert cond_estimate(A, inner="lu") == pytest.approx(ev[-1] / ev[0], rel=1e-4)


def test_cond_diagonal():
    d = np.array([0.5, 3.0, 7.0, 2.0, 1.5])
    assert cond_estimate(sp.diags(d).tocsr()) == pytest.approx(14.0, rel=1e-6)


def test_cond_mask_excludes_inactive_block():
    A = laplacian_1d(6)
    big = sp.block_diag([A, sp.identity(4)]).tocsr()
    active = np.r_[np.ones(6, bool), np.zeros(4, bool)]
    ev = np.linalg.eigvalsh(A.toarray())
    assert cond_estimate(big, active) == pytest.approx(ev[-1] / ev[0], rel=1e-4)


def test_cond_indefinite():
    A = sp.csr_matrix(np.diag([1.0, -2.0, 3.0]))
    with pytest.raises(NonPositive):
        cond_estimate(A, inner="lu")
    with pytest.raises(NonPositive):
        cond_estimate(A, inner="cg")


def test_extreme_eigenvalues_with_deflation():
    # singular Neumann-like matrix: constants in the kernel
    A = laplacian_1d(8).tolil()
    A[0, 0] = A[-1, -1] = 1.0
    A = A.tocsr()
    ev = np.linalg.eigvalsh(A.toarray())
    one = np.ones(8) / np.sqrt(8)
    lo, hi = extreme_eigenvalues(A + sp.csr_matrix(np.outer(one, one)), deflate=one, inner="lu")
    assert lo == pytest.approx(ev[1], rel=1e-5)
    assert hi == pytest.approx(ev[-1], rel=1e-5)


def test_negative_pivots():
    assert negative_pivots(laplacian_1d(10)) == 0
    D = sp.diags([1.0, -1.0, 2.0, -3.0]).tocsr()
    assert negative_pivots(D) == 2
    big = sp.diags(np.r_[np.ones(2500), -np.ones(3)]).tocsr()
    assert negative_pivots(big) == 3


def test_triplets_sum_duplicates_sorted():
    A = csr_from_triplets([0, 0, 1, 0], [1, 1, 0, 0], [1.0, 2.0, 5.0, 4.0], 2)
    np.testing.assert_array_equal(A.toarray(), [[4.0, 3.0], [5.0, 0.0]])
    assert A.has_sorted_indices and A.has_canonical_format


def test_direct_solvers_agree():
    A = laplacian_1d(30)
    b = np.arange(30.0)
    np.testing.assert_allclose(direct_solve(A, b), dense_solve(A, b), rtol=1e-12)
    with pytest.raises(ValueError):
        dense_solve(sp.identity(2001), np.ones(2001))


def test_sparse_system_symmetry_defect():
    A = sp.csr_matrix([[2.0, 1.0], [1.0 + 1e-9, 2.0]])
    s = SparseSystem(A, np.ones(2))
    assert s.symmetry_defect() == pytest.approx(np.sqrt(2) * 1e-9 / np.sqrt(10), rel=1e-6)
    assert s.active.all() and s.n == 2


def test_circle_system_iteration_bound():
    disc = Discretization.build(Circle(), 40, 2.0)
    system = assemble(manufactured_spec("dirichlet"), disc, alpha=2.0)
    u, res = solve(system, tol=1e-10)
    assert res.converged and res.iterations < 10 * system.n
