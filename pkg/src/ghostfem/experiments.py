"""Single runs and convergence studies for the manufactured problems."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import ErrorReport, fit_order, l2_errors, l2_errors_1d
from .assembly1d import Interval1DSetup, assemble_dirichlet_1d, assemble_mixed_1d
from .assembly2d import Discretization, apply_neumann_gauge, assemble, solve
from .levelset import Interval1D, NodeLabel
from .linalg import cond_estimate, direct_solve
from .problems import Sine1D, make_domain, manufactured_spec

DOMAINS_2D = ("circle", "flower", "leaf", "hourglass")
SWEEP_NS = (20, 40, 80, 160, 320, 640)


def sweep_theta_grid() -> np.ndarray:
    """Cut fractions 0.0010, 0.0015, ..., 0.9900."""
    return np.round(0.001 + 0.0005 * np.arange(1979), 4)


def theta_subsample(k: int = 20) -> np.ndarray:
    grid = sweep_theta_grid()
    return grid[np.linspace(0, len(grid) - 1, k).round().astype(int)]


@dataclass
class RunResult:
    N: int
    h: float
    alpha: float
    alpha_snap: float | None
    error: float
    grad_error: float
    cond: float = float("nan")
    iterations: int = 0
    wall_time: float = 0.0
    u: np.ndarray | None = None
    system: object = None
    extra: dict = field(default_factory=dict)

    def report(self) -> ErrorReport:
        return ErrorReport(self.N, self.h, self.error, self.grad_error, self.cond,
                           self.iterations, self.wall_time)


def run_2d(domain: str, bc: str, N: int, alpha: float = 2.0, alpha_snap: float | None = 2.0,
           rng: np.random.Generator | None = None, levelset=None, tol: float = 1e-10,
           with_cond: bool = False, penalty_mode: str = "robust", keep: bool = False) -> RunResult:
    """Solve the manufactured problem on one 2D domain and measure the errors."""
    t0 = time.perf_counter()
    ls = levelset if levelset is not None else make_domain(domain, N, rng)
    disc = Discretization.build(ls, N, alpha_snap)
    spec = manufactured_spec(bc, domain)
    system = assemble(spec, disc, alpha=alpha, penalty_mode=penalty_mode)
    cond = float("nan")
    if bc == "neumann":
        gauged = apply_neumann_gauge(system)
        u, res = solve(gauged, tol=tol)
        if with_cond:
            act = np.flatnonzero(system.active)
            cond = cond_estimate(system.matrix, system.active, inner="lu",
                                 deflate=np.ones(act.size) / np.sqrt(act.size))
    else:
        u, res = solve(system, tol=tol)
        if with_cond:
            cond = cond_estimate(system.matrix, system.active, inner="lu")
    err, gerr = l2_errors(u, spec.exact, spec.exact_grad, disc, zero_mean=(bc == "neumann"))
    return RunResult(N, disc.grid.h, alpha, alpha_snap, err, gerr, cond, res.iterations,
                     time.perf_counter() - t0, u if keep else None, system if keep else None,
                     {"disc": disc} if keep else {})


def run_1d(theta1: float, theta2: float, N: int, alpha: float = 2.0, alpha_snap: float | None = 2.0,
           bc: str = "mixed", problem: Sine1D | None = None, with_cond: bool = False,
           penalty_mode: str = "robust", keep: bool = False) -> RunResult:
    """1D problem on ``[a, b]`` with ``a = (1 - theta1) h``, ``b = 1 - (1 - theta2) h``.

    Boundary data are taken from the exact solution at the (possibly
    snapped) ends of the discrete interval.
    """
    t0 = time.perf_counter()
    P = problem or Sine1D()
    h = 1.0 / N
    interval = Interval1D((1 - theta1) * h, 1 - (1 - theta2) * h)
    setup = Interval1DSetup.from_levelset(interval, N, alpha, alpha_snap)
    x = setup.nodes
    if bc == "mixed":
        system = assemble_mixed_1d(setup, P.f(x), P.u(setup.a), P.du(setup.b), penalty_mode=penalty_mode)
    elif bc == "dirichlet":
        system = assemble_dirichlet_1d(setup, P.f(x), P.u(setup.a), P.u(setup.b), penalty_mode=penalty_mode)
    else:
        raise ValueError(f"1D problems support 'mixed' and 'dirichlet', got {bc!r}")
    u = direct_solve(system.matrix, system.rhs)
    cond = float("nan")
    if with_cond:
        act = system.active
        ev = np.linalg.eigvalsh(system.matrix.toarray()[np.ix_(act, act)])
        cond = float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
    err, gerr = l2_errors_1d(u, x, P.u, P.du, setup.a, setup.b)
    return RunResult(N, h, alpha, alpha_snap, err, gerr, cond, 0, time.perf_counter() - t0,
                     u if keep else None, system if keep else None, {"setup": setup} if keep else {})


def labels_1d(setup: Interval1DSetup) -> np.ndarray:
    labels = np.full(setup.N + 1, NodeLabel.INACTIVE)
    labels[setup.lo:setup.hi + 1] = NodeLabel.INTERIOR
    labels[[setup.lo, setup.hi]] = NodeLabel.GHOST
    return labels


def sample_rng(seed: int, N: int, sample: int) -> np.random.Generator:
    """Independent stream per ``(seed, N, sample)``, shared across penalties."""
    return np.random.default_rng([seed, N, sample])


def averaged_2d(domain: str, bc: str, N: int, alpha: float, alpha_snap: float | None,
                samples: int, seed: int, **kw) -> RunResult:
    """Mean of the error quantities over random circle centres (one run otherwise)."""
    if domain != "circle":
        return run_2d(domain, bc, N, alpha, alpha_snap, **kw)
    runs = [run_2d(domain, bc, N, alpha, alpha_snap, rng=sample_rng(seed, N, k), **kw)
            for k in range(samples)]
    return RunResult(N, runs[0].h, alpha, alpha_snap,
                     float(np.mean([r.error for r in runs])),
                     float(np.mean([r.grad_error for r in runs])),
                     float(np.mean([r.cond for r in runs])),
                     int(round(np.mean([r.iterations for r in runs]))),
                     float(sum(r.wall_time for r in runs)),
                     extra={"runs": runs})


def order(results, attr: str = "error") -> float:
    return fit_order([r.report() for r in results], attr)
