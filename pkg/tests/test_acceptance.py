"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import record
from ghostfem.assembly1d import Interval1DSetup, build_blocks_1d, traces
from ghostfem.experiments import run_1d, run_2d, sample_rng, theta_subsample
from ghostfem.analysis import fit_slope
from ghostfem.levelset import Circle
from ghostfem.linalg import NonPositive, extreme_eigenvalues
from ghostfem.quadrature import (boundary_matrices, local_mass_matrix, local_stiffness_matrix,
                                 normal_derivative_mass)
from oracles import hat, polygon_integral_fan, random_cut_polygons, segment_integral

NS_1D = (20, 40, 80, 160, 320, 640)
NS_CIRCLE = (20, 40, 80, 160, 320)
NS_SHAPES = (40, 80, 160, 320)
CIRCLE_SAMPLES = 10
ALPHAS = (1.5, 1.75, 2.0)

# structural checks gathered while running criteria 1-3, read by criterion 7
STRUCTURE: list[tuple[str, float, float]] = []


def _order(hs, errors):
    return fit_slope(hs, errors)


def _check_structure(label, system):
    defect = system.symmetry_defect()
    try:
        lam_min, _ = extreme_eigenvalues(system.matrix, system.active, inner="lu", rtol=1e-4)
    except NonPositive:
        lam_min = -np.inf
    STRUCTURE.append((label, defect, lam_min))


def _check_structure_1d(label, system):
    act = system.active
    A = system.matrix.toarray()[np.ix_(act, act)]
    STRUCTURE.append((label, system.symmetry_defect(), float(np.linalg.eigvalsh(A)[0])))


def _run_2d_checked(domain, bc, N, alpha, rng=None):
    r = run_2d(domain, bc, N, alpha, alpha_snap=alpha, rng=rng, keep=True)
    _check_structure(f"{domain}/{bc} N={N} alpha={alpha}", r.system)
    r.system = r.u = None
    r.extra.clear()
    return r


@pytest.fixture(scope="module")
def circle_suite():
    """Mean L2 errors per alpha over seeded random centres, plus wall time per alpha."""
    errors, times = {}, {}
    for alpha in ALPHAS:
        t0 = time.perf_counter()
        errors[alpha] = [
            np.mean([_run_2d_checked("circle", "dirichlet", N, alpha, sample_rng(0, N, k)).error
                     for k in range(CIRCLE_SAMPLES)])
            for N in NS_CIRCLE
        ]
        times[alpha] = time.perf_counter() - t0
    return errors, times


def test_c1_1d_mixed_orders():
    thetas = theta_subsample(20)
    hs = [1.0 / N for N in NS_1D]
    t0 = time.perf_counter()
    orders, grad_orders = [], []
    for theta1 in thetas:
        runs = [run_1d(theta1, 1e-3, N, 2.0, 2.0, "mixed", keep=True) for N in NS_1D]
        orders.append(_order(hs, [r.error for r in runs]))
        grad_orders.append(_order(hs, [r.grad_error for r in runs]))
        for r in runs:
            _check_structure_1d(f"1d theta1={theta1} N={r.N}", r.system)
    elapsed = time.perf_counter() - t0
    ok = (all(1.8 <= p <= 2.2 for p in orders) and min(grad_orders) >= 0.9 and elapsed < 30)
    record("C1", ok, f"L2 order {min(orders):.3f}..{max(orders):.3f}, gradient order "
                     f">= {min(grad_orders):.3f}, {elapsed:.1f} s")
    assert ok


def test_c2_circle_dirichlet(circle_suite):
    errors, times = circle_suite
    hs = [1.0 / N for N in NS_CIRCLE]
    p2 = _order(hs, errors[2.0])
    p15 = _order(hs[-3:], errors[1.5][-3:])
    elapsed = times[2.0] + times[1.5]
    ok = 1.7 <= p2 <= 2.3 and 1.3 <= p15 <= 2.3 and elapsed < 600
    record("C2", ok, f"order alpha=2 {p2:.3f}, alpha=1.5 (last three) {p15:.3f}, {elapsed:.0f} s")
    assert ok


SHAPE_CASES = [("flower", "dirichlet"), ("leaf", "dirichlet"), ("hourglass", "dirichlet"),
               ("leaf", "mixed"), ("hourglass", "mixed")]


def test_c3_other_domains():
    hs = [1.0 / N for N in NS_SHAPES]
    orders = {}
    for domain, bc in SHAPE_CASES:
        errs = [_run_2d_checked(domain, bc, N, 2.0).error for N in NS_SHAPES]
        orders[f"{domain}/{bc}"] = _order(hs, errs)
    ok = all(1.6 <= p <= 2.4 for p in orders.values())
    record("C3", ok, ", ".join(f"{k} {v:.3f}" for k, v in orders.items()))
    assert ok


def test_c4_orders_monotone_in_alpha(circle_suite):
    errors, _ = circle_suite
    hs = [1.0 / N for N in NS_CIRCLE]
    orders = [_order(hs, errors[a]) for a in ALPHAS]
    ok = all(b >= a - 0.25 for a, b in zip(orders, orders[1:]))
    record("C4", ok, ", ".join(f"alpha={a} {p:.3f}" for a, p in zip(ALPHAS, orders)))
    assert ok


def _worst_relative(ours, oracle):
    scale = np.abs(oracle).max()
    return float(np.abs(ours - oracle).max() / scale) if scale > 0 else float(np.abs(ours).max())


def test_c5_quadrature_exactness():
    worst = 0.0
    polys = list(random_cut_polygons(200, seed=2024))
    for poly in polys:
        h = poly.h
        hats = [hat(i, poly.origin, h) for i in range(4)]
        M = np.empty((4, 4))
        K = np.empty((4, 4))
        Bm = np.empty((4, 4))
        Bf = np.empty((4, 4))
        G = np.empty((4, 4))
        PA, PB = poly.boundary_segment
        n = poly.normal
        for i, (vi, gi) in enumerate(hats):
            for j, (vj, gj) in enumerate(hats):
                M[i, j] = polygon_integral_fan(lambda x, y: vi(x, y) * vj(x, y), poly.vertices)
                K[i, j] = polygon_integral_fan(lambda x, y: gi(x, y)[0] * gj(x, y)[0]
                                               + gi(x, y)[1] * gj(x, y)[1], poly.vertices)
                Bm[i, j] = segment_integral(lambda x, y: vi(x, y) * vj(x, y), PA, PB)
                Bf[i, j] = segment_integral(lambda x, y: (n[0] * gj(x, y)[0] + n[1] * gj(x, y)[1])
                                            * vi(x, y), PA, PB)
                G[i, j] = segment_integral(lambda x, y: (n[0] * gi(x, y)[0] + n[1] * gi(x, y)[1])
                                           * (n[0] * gj(x, y)[0] + n[1] * gj(x, y)[1]), PA, PB)
        A, B = poly.local_segment
        mass, flux = boundary_matrices(A, B, n, h)
        worst = max(worst,
                    _worst_relative(local_mass_matrix(poly, h), M),
                    _worst_relative(local_stiffness_matrix(poly), K),
                    _worst_relative(mass, Bm),
                    _worst_relative(flux, Bf),
                    _worst_relative(normal_derivative_mass(A, B, n, h), G))
    ok = len(polys) == 200 and worst <= 1e-12
    record("C5", ok, f"{len(polys)} polygons, worst relative deviation {worst:.2e}")
    assert ok


def printed_closed_forms(N, theta1, theta2):
    """The 1D entries exactly as printed in the closed-form listing.

    Returns ``{(block, i, j): value}``. Interior entries are listed for the
    index ranges where the printed formulas apply without overlap.
    """
    h = 1.0 / N
    t1, t2 = theta1, theta2
    out = {}

    def sym(block, i, j, v):
        out[(block, i, j)] = v
        out[(block, j, i)] = v

    sym("S", 0, 0, t1 / h)
    sym("S", 0, 1, -t1 / h)
    sym("S", 1, 1, (1 + t1) / h)
    sym("S", N - 1, N - 1, (1 + t2) / h)
    sym("S", N - 1, N, -t2 / h)
    sym("S", N, N, t2 / h)
    for i in range(2, N):
        sym("S", i - 1, i, -1 / h)
    for i in range(2, N - 1):
        sym("S", i, i, 2 / h)

    for i in range(2, N - 1):
        sym("M", i, i - 1, h / 6)
        sym("M", i, i, 4 * h / 6)
        sym("M", i, i + 1, h / 6)
    sym("M", 0, 0, h * t1**3 / 3)
    sym("M", 0, 1, h * (t1**2 / 2 - t1**3 / 3))
    sym("M", 1, 1, h * (1 + t1**3) / 3)
    sym("M", N - 1, N - 1, h * ((1 + t2**3) / 3 - t2**2 + t2))
    sym("M", N - 1, N, h * (t2**2 / 2 - t2**3 / 3))
    sym("M", N, N, h * t2**3 / 3)

    out[("ta", 0, 0)], out[("ta", 1, 0)] = t1, 1 - t1
    out[("tb", N, 0)], out[("tb", N - 1, 0)] = t2, 1 - t2
    out[("da", 0, 0)], out[("da", 1, 0)] = -1 / h, 1 / h
    out[("db", N, 0)], out[("db", N - 1, 0)] = 1 / h, -1 / h

    sym("P_a", 0, 0, t1**2)
    sym("P_a", 0, 1, t1 * (1 - t1))
    sym("P_a", 1, 1, 1 - t1**2)
    # the b end mirrors the a end
    sym("P_b", N, N, t2**2)
    sym("P_b", N, N - 1, t2 * (1 - t2))
    sym("P_b", N - 1, N - 1, 1 - t2**2)
    return out


def test_c6_closed_forms_match_printed_listing():
    rng = np.random.default_rng(6)
    mismatches = {}
    checked = 0
    for _ in range(50):
        N = int(rng.integers(8, 641))
        t1, t2 = rng.uniform(0.01, 0.99, size=2)
        setup = Interval1DSetup.from_thetas(N, t1, t2)
        blocks = build_blocks_1d(setup)
        ta, da, tb, db = traces(setup)
        ours = {"S": blocks.S, "M": blocks.M, "P_a": blocks.P_a, "P_b": blocks.P_b,
                "ta": ta[:, None], "tb": tb[:, None], "da": da[:, None], "db": db[:, None]}
        printed = printed_closed_forms(N, setup.theta1, setup.theta2)
        for name, mat in ours.items():
            for i, j in zip(*np.nonzero(mat)):
                checked += 1
                key = (name, int(i), int(j))
                if key not in printed:
                    mismatches.setdefault(f"{name}[{i},{j}] unlisted", 0)
                    continue
                ref = printed[key]
                if abs(mat[i, j] - ref) > 1e-13 * max(1.0, abs(ref)):
                    label = name + "[" + ",".join(_symbolic(k, N) for k in (i, j)) + "]"
                    mismatches[label] = mismatches.get(label, 0) + 1
    ok = not mismatches
    detail = f"{checked} nonzeros over 50 triples"
    if mismatches:
        detail += "; mismatched " + ", ".join(f"{k} x{v}" for k, v in sorted(mismatches.items()))
    record("C6", ok, detail)
    assert ok, detail


def _symbolic(k, N):
    k = int(k)
    return {N: "N", N - 1: "N-1"}.get(k, str(k))


def test_c7_structure():
    if not STRUCTURE:
        pytest.skip("criteria 1-3 did not run")
    worst_defect = max(d for _, d, _ in STRUCTURE)
    worst = min(STRUCTURE, key=lambda s: s[2])
    ok = worst_defect <= 1e-12 and worst[2] > 0
    record("C7", ok, f"{len(STRUCTURE)} systems, max symmetry defect {worst_defect:.1e}, "
                     f"smallest lambda_min {worst[2]:.3e} ({worst[0]})")
    assert ok


def test_c8_snapping_near_node():
    N = 80
    h = 1.0 / N
    # the centred circle of radius 0.4 passes through grid nodes such as
    # (0.9, 0.5); the shift puts that node 0.5e-10 h inside the domain
    base = Circle(0.5, 0.5, 0.4)
    near = Circle(0.5 + 0.5e-10 * h, 0.5, 0.4)
    assert 0 < -near(np.array([0.9]), np.array([0.5]))[0] < 1e-10 * h
    ref = run_2d("circle", "dirichlet", N, 2.0, 2.0, levelset=base)
    snapped = run_2d("circle", "dirichlet", N, 2.0, 2.0, levelset=near, with_cond=True)
    try:
        raw = run_2d("circle", "dirichlet", N, 2.0, None, levelset=near, with_cond=True)
        raw_cond, raw_note = raw.cond, f"{raw.cond:.3e}"
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raw_cond, raw_note = np.inf, f"failed ({type(exc).__name__})"
    ok = (np.isfinite(snapped.cond) and snapped.error <= 2 * ref.error
          and not raw_cond <= snapped.cond)
    record("C8", ok, f"snapped cond {snapped.cond:.3e}, error {snapped.error:.3e} vs "
                     f"{ref.error:.3e} unperturbed; unsnapped cond {raw_note}")
    assert ok
