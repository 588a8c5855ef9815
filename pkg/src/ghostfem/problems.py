"""Manufactured solutions and the domain catalogue used by the experiments.

2D: ``u = cos(2 pi x) cos(2 pi y)`` so ``f = -lap u = 8 pi^2 u``.
1D: ``u = sin(k0 x + k1)`` so ``f = -u'' = k0^2 u``.
"""
from __future__ import annotations

import numpy as np

from .assembly2d import BVPSpec
from .levelset import Circle, Flower, Hourglass, Leaf

TWO_PI = 2 * np.pi


def u_exact(x, y):
    return np.cos(TWO_PI * x) * np.cos(TWO_PI * y)


def grad_exact(x, y):
    gx = -TWO_PI * np.sin(TWO_PI * x) * np.cos(TWO_PI * y)
    gy = -TWO_PI * np.cos(TWO_PI * x) * np.sin(TWO_PI * y)
    return np.stack([gx, gy], axis=-1)


def f_exact(x, y):
    return 2 * TWO_PI**2 * u_exact(x, y)


def flux_exact(x, y, n):
    return grad_exact(x, y) @ np.asarray(n, dtype=float)


# Gamma_D for mixed problems: a half plane per domain
MIXED_SPLIT = {"circle": 0.5, "leaf": 0.5, "hourglass": 0.0, "flower": 0.0}


def dirichlet_half_plane(x_max: float):
    def region(x, y):
        return x <= x_max
    return region


def manufactured_spec(bc: str, domain: str = "circle", boundary_data: str = "analytic") -> BVPSpec:
    region = dirichlet_half_plane(MIXED_SPLIT[domain]) if bc == "mixed" else None
    return BVPSpec(
        bc=bc,
        f=f_exact,
        g_D=u_exact if bc != "neumann" else None,
        g_N=flux_exact if bc != "dirichlet" else None,
        dirichlet_region=region,
        exact=u_exact,
        exact_grad=grad_exact,
        boundary_data=boundary_data,
    )


def circle_center(N: int, rng: np.random.Generator) -> tuple[float, float]:
    """Randomly shifted centre ``(0.5 + e1 h, 0.5 + e2 h)`` with ``e1, e2 ~ U[0, 1)``."""
    h = 1.0 / N
    e1, e2 = rng.random(2)
    return 0.5 + e1 * h, 0.5 + e2 * h


def make_domain(name: str, N: int | None = None, rng: np.random.Generator | None = None):
    """Level set for a named 2D domain; the circle centre is randomised if ``rng`` is given."""
    if name == "circle":
        if rng is None:
            return Circle()
        xc, yc = circle_center(N, rng)
        return Circle(xc, yc, 0.4)
    if name == "flower":
        return Flower()
    if name == "leaf":
        return Leaf()
    if name == "hourglass":
        return Hourglass()
    raise ValueError(f"unknown 2D domain {name!r}")


class Sine1D:
    """``u = sin(k0 x + k1)`` with derivatives."""

    def __init__(self, k0: float = 5.0, k1: float = 1.0):
        self.k0 = k0
        self.k1 = k1

    def u(self, x):
        return np.sin(self.k0 * np.asarray(x, dtype=float) + self.k1)

    def du(self, x):
        return self.k0 * np.cos(self.k0 * np.asarray(x, dtype=float) + self.k1)

    def f(self, x):
        return self.k0**2 * self.u(x)
