"""Command line runner: single solves, convergence studies and the 1D cut sweep.

    ghostfem convergence --domain circle --bc dirichlet --n 20,40,80 --alpha 2 --samples 10
    ghostfem sweep1d --n 20,40,80,160,320,640 --alpha 2 --theta2 1e-3
    ghostfem solve --domain interval --bc mixed --n 20 --out u.csv

Results are CSV; ``#`` lines at the end carry fitted orders.
Exit status: 0 on success, 1 if any run failed numerically, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys

import numpy as np

from .analysis import InsufficientData, fit_slope
from .experiments import (DOMAINS_2D, averaged_2d, labels_1d, sweep_theta_grid, run_1d, run_2d,
                          theta_subsample)
from .levelset import NodeLabel

log = logging.getLogger("ghostfem")

HEADER = ["command", "domain", "bc", "N", "h", "alpha", "alpha_snap", "seed", "sample",
          "error", "grad_error", "cond", "iters"]
SOLUTION_HEADER = ["node", "x", "y", "u", "label"]
DOMAIN_CHOICES = DOMAINS_2D + ("interval",)
NUMERIC_ERRORS = (ArithmeticError, RuntimeError, ValueError)


class UsageError(Exception):
    pass


def _num(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _list(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma separated list, got {text!r}") from None
    return parse


def _snap(text: str):
    if text.lower() == "none":
        return "none"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'none', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostfem", description="Ghost-point FEM for Poisson on level-set domains.")
    p.add_argument("command", choices=["solve", "convergence", "sweep1d"])
    p.add_argument("--domain", choices=DOMAIN_CHOICES, default=None,
                   help="circle, flower, leaf, hourglass or interval (default: circle, interval for sweep1d)")
    p.add_argument("--bc", choices=["dirichlet", "neumann", "mixed"], default=None,
                   help="default: dirichlet in 2D, mixed in 1D")
    p.add_argument("--n", type=_list(int), default=None, help="grid sizes, strictly increasing")
    p.add_argument("--alpha", type=_list(float), default=[2.0], help="penalty exponents, lam = h**-alpha")
    p.add_argument("--alpha-snap", type=_snap, default=None,
                   help="snapping exponent (default: alpha; 'none' disables snapping)")
    p.add_argument("--samples", type=int, default=1, help="random circle centres per level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10, help="CG relative residual tolerance")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--theta1", type=_list(float), default=None,
                   help="1D left cut fractions (sweep1d default: the full 0.0010..0.990 grid)")
    p.add_argument("--theta2", type=float, default=1e-3, help="1D right cut fraction")
    p.add_argument("--subsample", type=int, default=None,
                   help="sweep1d: use this many evenly spaced values of the default theta1 grid")
    p.add_argument("--cond", action="store_true", help="estimate condition numbers")
    p.add_argument("--penalty", choices=["robust", "uniform"], default="robust",
                   help="'uniform' uses lam = h**-alpha on every cut cell")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _validate(args) -> None:
    if args.domain is None:
        args.domain = "interval" if args.command == "sweep1d" else "circle"
    if args.bc is None:
        args.bc = "mixed" if args.domain == "interval" else "dirichlet"
    if args.n is None:
        args.n = [20, 40, 80, 160, 320, 640] if args.domain == "interval" else [20, 40, 80, 160]
    if args.command == "sweep1d" and args.domain != "interval":
        raise UsageError("sweep1d runs on the interval domain only")
    if args.domain == "interval" and args.bc == "neumann":
        raise UsageError("1D problems support dirichlet and mixed conditions")
    if args.command == "convergence" and args.domain == "interval":
        raise UsageError("use sweep1d for 1D convergence studies")
    if not args.n or any(n < 4 for n in args.n) or any(b <= a for a, b in zip(args.n, args.n[1:])):
        raise UsageError("--n must be a strictly increasing list of integers >= 4")
    if not args.alpha or any(not a > 0 for a in args.alpha):
        raise UsageError("--alpha values must be positive")
    if isinstance(args.alpha_snap, float) and not args.alpha_snap > 0:
        raise UsageError("--alpha-snap must be positive")
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    if not 0 < args.tol < 1:
        raise UsageError("--tol must lie in (0, 1)")
    if not 0 <= args.theta2 <= 1 or any(not 0 <= t <= 1 for t in args.theta1 or []):
        raise UsageError("cut fractions must lie in [0, 1]")
    if args.command == "solve" and (len(args.n) != 1 or len(args.alpha) != 1):
        raise UsageError("solve takes a single --n and a single --alpha")


def _alpha_snap(args, alpha):
    if args.alpha_snap is None:
        return alpha
    return None if args.alpha_snap == "none" else args.alpha_snap


def _row(args, domain, N, h, alpha, snap, sample, result):
    err, gerr, cond, iters = ((result.error, result.grad_error, result.cond, result.iterations)
                              if result is not None else (math.nan,) * 3 + (0,))
    return [args.command, domain, args.bc, _num(N), _num(h), _num(alpha), _num(snap),
            _num(args.seed), str(sample), _num(err), _num(gerr), _num(cond), _num(iters)]


def _slopes(label: str, hs, results) -> list[str]:
    ok = [(h, r) for h, r in zip(hs, results) if r is not None]
    lines = []
    for attr in ("error", "grad_error", "cond"):
        vals = [(h, getattr(r, attr)) for h, r in ok if np.isfinite(getattr(r, attr))]
        try:
            slope = fit_slope([v[0] for v in vals], [v[1] for v in vals])
        except InsufficientData:
            continue
        lines.append(f"# slope {label} {attr}={_num(slope)}")
    return lines


def _failure(lines, what, exc):
    msg = " ".join(str(exc).split())
    lines.append(f"# failed {what}: {type(exc).__name__}: {msg}")
    log.warning("%s failed: %s", what, msg)


def run_convergence(args, rows, footer) -> bool:
    ok = True
    for alpha in args.alpha:
        snap = _alpha_snap(args, alpha)
        results = []
        for N in args.n:
            try:
                r = averaged_2d(args.domain, args.bc, N, alpha, snap, args.samples, args.seed,
                                tol=args.tol, with_cond=args.cond, penalty_mode=args.penalty)
            except NUMERIC_ERRORS as exc:
                _failure(footer, f"N={N} alpha={_num(alpha)}", exc)
                ok, r = False, None
            sample = "mean" if args.domain == "circle" and args.samples > 1 else "0"
            rows.append(_row(args, args.domain, N, 1.0 / N, alpha, snap, sample, r))
            results.append(r)
        footer.extend(_slopes(f"alpha={_num(alpha)}", [1.0 / N for N in args.n], results))
    return ok


def run_sweep1d(args, rows, footer) -> bool:
    if args.theta1 is not None:
        thetas = np.asarray(args.theta1, dtype=float)
    elif args.subsample is not None:
        thetas = theta_subsample(args.subsample)
    else:
        thetas = sweep_theta_grid()
    ok = True
    for alpha in args.alpha:
        snap = _alpha_snap(args, alpha)
        for k, theta1 in enumerate(thetas):
            results = []
            for N in args.n:
                try:
                    r = run_1d(theta1, args.theta2, N, alpha, snap, args.bc,
                               with_cond=args.cond, penalty_mode=args.penalty)
                except NUMERIC_ERRORS as exc:
                    _failure(footer, f"theta1={_num(theta1)} N={N} alpha={_num(alpha)}", exc)
                    ok, r = False, None
                rows.append(_row(args, "interval", N, 1.0 / N, alpha, snap, str(k), r))
                results.append(r)
            footer.extend(_slopes(f"alpha={_num(alpha)} sample={k} theta1={_num(theta1)} "
                                  f"theta2={_num(args.theta2)}", [1.0 / N for N in args.n], results))
    return ok


def run_solve(args):
    """Per-node table ``node,x,y,u,label``; inactive nodes carry ``u = 0``."""
    N, alpha = args.n[0], args.alpha[0]
    snap = _alpha_snap(args, alpha)
    rows = []
    if args.domain == "interval":
        theta1 = args.theta1[0] if args.theta1 else 0.5
        r = run_1d(theta1, args.theta2, N, alpha, snap, args.bc, penalty_mode=args.penalty, keep=True)
        setup = r.extra["setup"]
        labels = labels_1d(setup)
        for i, (x, u) in enumerate(zip(setup.nodes, r.u)):
            rows.append([str(i), _num(x), "0", _num(u), NodeLabel(labels[i]).name.lower()])
    else:
        r = run_2d(args.domain, args.bc, N, alpha, snap, tol=args.tol, penalty_mode=args.penalty, keep=True)
        disc = r.extra["disc"]
        xy = disc.grid.node_coords()
        u = np.where(disc.active, r.u[:disc.grid.n_nodes], 0.0)
        for i in range(disc.grid.n_nodes):
            rows.append([str(i), _num(xy[i, 0]), _num(xy[i, 1]), _num(u[i]),
                         NodeLabel(disc.node_labels[i]).name.lower()])
    footer = [f"# error={_num(r.error)} grad_error={_num(r.grad_error)} iters={r.iterations}"]
    return rows, footer


def _write(path: str, header, rows, footer) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    for line in footer:
        buf.write(line + "\n")
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        _validate(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ghostfem: error: {exc}", file=sys.stderr)
        return 2

    if args.command == "solve":
        try:
            rows, footer = run_solve(args)
        except NUMERIC_ERRORS as exc:
            print(f"ghostfem: solve failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        _write(args.out, SOLUTION_HEADER, rows, footer)
        return 0

    rows, footer = [], []
    run = run_convergence if args.command == "convergence" else run_sweep1d
    ok = run(args, rows, footer)
    _write(args.out, HEADER, rows, footer)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
