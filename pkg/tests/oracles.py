"""Independent reference integrators used as test oracles."""
import numpy as np

_GX, _GW = np.polynomial.legendre.leggauss(6)  # exact to degree 11 per direction
_GX = 0.5 * (_GX + 1)
_GW = 0.5 * _GW


def triangle_integral(g, p0, p1, p2):
    """Integral of ``g(x, y)`` over a triangle with tensor Gauss on the collapsed square."""
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    u, v = np.meshgrid(_GX, _GX, indexing="ij")
    w = np.outer(_GW, _GW)
    pts = p0 + u[..., None] * (p1 - p0) + (u * v)[..., None] * (p2 - p1)
    det = abs((p1 - p0)[0] * (p2 - p1)[1] - (p1 - p0)[1] * (p2 - p1)[0])
    return float(np.sum(w * u * det * g(pts[..., 0], pts[..., 1])))


def polygon_integral_fan(g, vertices):
    v = np.asarray(vertices, dtype=float)
    return sum(triangle_integral(g, v[0], v[k], v[k + 1]) for k in range(1, len(v) - 1))


def segment_integral(g, A, B, n=8):
    """``int_AB g dl`` with n-point Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    pts = A + x[:, None] * (B - A)
    return float(0.5 * w @ g(pts[:, 0], pts[:, 1]) * np.hypot(*(B - A)))


def hat(i, origin, h):
    """Physical bilinear hat of local vertex ``i`` and its gradient."""
    ox, oy = origin

    def s_t(x, y):
        return (x - ox) / h, (y - oy) / h

    def val(x, y):
        s, t = s_t(x, y)
        return [(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t][i]

    def grad(x, y):
        s, t = s_t(x, y)
        gs = [-(1 - t), 1 - t, t, -t][i]
        gt = [-(1 - s), -s, s, 1 - s][i]
        return np.asarray(gs) / h, np.asarray(gt) / h

    return val, grad


def simpson(g, a, b, panels=100_000):
    if panels % 2:
        panels += 1
    x = np.linspace(a, b, panels + 1)
    y = g(x)
    dx = (b - a) / panels
    return float(dx / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def random_cut_polygons(count, h=0.1, seed=0):
    """Cut polygons from random vertex values (1, 2 or 3 inside vertices)."""
    from ghostfem.geometry import build_polygon, edge_intersections

    rng = np.random.default_rng(seed)
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    out = []
    while len(out) < count:
        phi = rng.uniform(-1, 1, 4)
        inside = phi < 0
        if inside.all() or not inside.any():
            continue
        if inside[0] == inside[2] and inside[1] == inside[3] and inside[0] != inside[1]:
            continue  # checkerboard
        origin = rng.uniform(-1, 1, 2)
        coords = origin + h * square
        A, B = edge_intersections(phi, coords)
        poly = build_polygon(len(out), phi, coords, A, B, h=h)
        if not poly.degenerate:
            out.append(poly)
    return out
