"""Command-line entry point ``roughspec``.

Exit codes: 0 success, 1 numeric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ANNULUS_HEADER,
    annulus_table,
    convergence_study,
    eigenfunctions,
    fool_demo,
    mosco_table,
    poincare_check,
    write_mosco,
    write_table,
)
from .eigensolve import BoundNotAchievedError, DescentStalledError, NotPositiveDefiniteError
from .enclosure import EnclosureInvalidError, ExternalFormulaError, Limits, gamma_n, gamma_pix
from .fem import MeshTooCoarseError, assemble, triangulate, write_matrix_market, write_vtk
from .geometry import (
    EmptyPixelationError,
    components,
    oracle_annulus,
    oracle_disc,
    oracle_julia,
    oracle_koch,
    oracle_square,
    oracle_strips,
    pixelate,
    write_pbm,
)
from .geometry.pixels import lattice_points

log = logging.getLogger("roughspec")

COMMANDS = ("pixelate", "spectrum", "converge", "mosco", "poincare", "fool", "eigfun", "annulus")


class UsageError(ValueError):
    pass


def _number(text: str) -> float:
    """A float, also accepting ``pi`` and simple multiples such as ``2pi`` or ``pi/2``."""
    t = text.strip().lower().replace(" ", "")
    if "pi" in t:
        head, _, tail = t.partition("pi")
        coef = float(head) if head not in ("", "+", "-") else (-1.0 if head == "-" else 1.0)
        val = coef * math.pi
        if tail.startswith("/"):
            val /= float(tail[1:])
        elif tail:
            raise argparse.ArgumentTypeError(f"cannot parse number {text!r}")
        return val
    try:
        return float(t)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse number {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from exc


def _num_list(text: str) -> list[float]:
    return [_number(s) for s in text.split(",") if s.strip()]


def _complex(text: str) -> complex:
    parts = _num_list(text)
    if len(parts) == 1:
        parts.append(0.0)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected RE,IM")
    return complex(parts[0], parts[1])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughspec", description="Dirichlet spectra of rough planar domains from membership oracles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    g = p.add_argument_group("domain")
    g.add_argument("--oracle", choices=("julia", "koch", "square", "disc", "annulus", "strips"), default=None)
    g.add_argument("--c", type=_complex, default=None,
                   help="Julia parameter RE,IM (required for julia; the basilica-like set of the convergence study is -0.6180339887,0)")
    g.add_argument("--max-iter-julia", type=int, default=1000)
    g.add_argument("--level", type=int, default=4, help="Koch level")
    g.add_argument("--a", type=_number, default=0.0, help="square lower corner coordinate")
    g.add_argument("--b", type=_number, default=1.0, help="square upper corner coordinate")
    g.add_argument("--radius", type=_number, default=1.0, help="disc radius")
    g.add_argument("--eps", type=_number, default=None, help="annulus inner radius or strip width")
    g.add_argument("--anchor-n", type=int, default=2,
                   help="strips: anchors are the points j/N, |j/N| <= N, inside the square base")
    r = p.add_argument_group("resolution")
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--n-list", type=_int_list, default=None)
    r.add_argument("--m", type=int, default=None)
    r.add_argument("--m-max", type=int, default=None)
    s = p.add_argument_group("solver")
    s.add_argument("--target-eps", type=_number, default=None, help="accuracy for the pixel-domain driver")
    s.add_argument("--C0", type=_number, default=0.493)
    s.add_argument("--q-mode", choices=("constant", "pencil"), default="constant")
    s.add_argument("--grad-tol", type=_number, default=1e-10)
    s.add_argument("--dense-cap", type=int, default=3000)
    s.add_argument("--M-max", type=int, default=50)
    s.add_argument("--max-iter", type=int, default=200_000)
    s.add_argument("--precondition", action="store_true", help="LU-preconditioned descent")
    x = p.add_argument_group("experiments")
    x.add_argument("--trials", type=int, default=100)
    x.add_argument("--r", type=_number, default=0.02, help="collar width")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--eps-list", type=_num_list, default=None)
    x.add_argument("--k-list", type=_int_list, default=[1])
    x.add_argument("--n-hi", type=int, default=128, help="resolution of the thin-domain eigenvalue runs")
    x.add_argument("--mtx", action="store_true", help="pixelate: also write mesh VTK and Matrix Market pencil (needs --m)")
    p.add_argument("--out", default=None, help="output path prefix (default: the command name)")
    p.add_argument("--quiet", action="store_true")
    return p


def make_oracle(args):
    kind = args.oracle
    if kind is None:
        kind = "square" if args.command in ("spectrum", "fool", "eigfun", "pixelate", "mosco") else "koch"
    if kind == "julia":
        if args.c is None:
            raise UsageError("julia oracle needs --c RE,IM")
        if args.max_iter_julia < 1:
            raise UsageError("--max-iter-julia must be >= 1")
        return oracle_julia(args.c, max_iter=args.max_iter_julia)
    if kind == "koch":
        if not 0 <= args.level <= 10:
            raise UsageError("--level must lie in 0..10")
        return oracle_koch(args.level)
    if kind == "square":
        if not args.a < args.b:
            raise UsageError("--a must be smaller than --b")
        return oracle_square(args.a, args.b)
    if kind == "disc":
        if not args.radius > 0:
            raise UsageError("--radius must be positive")
        return oracle_disc(args.radius)
    if kind == "strips":
        if not args.a < args.b:
            raise UsageError("--a must be smaller than --b")
        if args.eps is None or not args.eps > 0:
            raise UsageError("strips oracle needs a positive --eps")
        if args.anchor_n < 1:
            raise UsageError("--anchor-n must be >= 1")
        base = oracle_square(args.a, args.b)
        pts = lattice_points(args.anchor_n, args.anchor_n) / args.anchor_n
        anchors = pts[base.membership(pts[:, 0], pts[:, 1])]
        if len(anchors) == 0:
            raise UsageError("no anchor lattice point lies inside the square base")
        return oracle_strips(base, anchors, args.eps)
    eps = 0.1 if args.eps is None else args.eps
    if not 0 < eps < 1:
        raise UsageError("annulus --eps must lie in (0, 1)")
    return oracle_annulus(eps)


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise UsageError(msg)


def validate(args) -> None:
    """Range checks that must pass before any computation starts."""
    if args.n is not None:
        _need(args.n >= 1, "--n must be >= 1")
    if args.n_list is not None:
        _need(len(args.n_list) > 0 and min(args.n_list) >= 1, "--n-list needs positive integers")
    if args.m is not None:
        _need(args.m >= 0, "--m must be >= 0")
    if args.m_max is not None:
        _need(args.m_max >= 0, "--m-max must be >= 0")
    _need(args.C0 >= 0, "--C0 must be nonnegative")
    _need(args.grad_tol > 0, "--grad-tol must be positive")
    _need(args.dense_cap >= 1 and args.M_max >= 1 and args.max_iter >= 1, "solver limits must be positive")
    _need(args.trials >= 1, "--trials must be >= 1")
    _need(args.r > 0, "--r must be positive")
    if args.target_eps is not None:
        _need(args.target_eps > 0, "--target-eps must be positive")
    cmd = args.command
    if cmd in ("pixelate", "spectrum", "poincare", "eigfun"):
        _need(args.n is not None, f"{cmd} needs --n")
    if cmd in ("converge", "mosco"):
        _need(args.n_list is not None and len(args.n_list) > 0, f"{cmd} needs a non-empty --n-list")
    if cmd == "converge":
        _need(args.m_max is not None and args.m_max >= 1, "converge needs --m-max >= 1")
    if cmd == "pixelate" and args.mtx:
        _need(args.m is not None, "--mtx needs --m")
    if cmd == "eigfun":
        _need(min(args.k_list, default=0) >= 1, "--k-list needs positive integers")
    if cmd == "fool":
        _need(args.n is not None, "fool needs --n (the fixed resolution)")
        _need(args.eps_list is not None and len(args.eps_list) > 0 and min(args.eps_list) > 0,
              "fool needs a positive --eps-list")
        _need(args.n_hi >= 1, "--n-hi must be >= 1")
    if cmd == "annulus":
        eps = args.eps_list or [0.3, 0.1, 0.03]
        _need(all(0 < e < 1 for e in eps), "annulus --eps-list values must lie in (0, 1)")


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _sidecar(prefix: Path, args, argv) -> None:
    """Run metadata kept apart from the primary outputs so those stay byte-reproducible."""
    meta = {"argv": list(argv), "version": __version__, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    prefix.with_name(prefix.name + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def run(args, argv) -> int:
    validate(args)
    prefix = Path(args.out or args.command)
    if prefix.parent and not prefix.parent.exists():
        raise UsageError(f"output directory {prefix.parent} does not exist")
    cmd = args.command

    if cmd == "annulus":
        rows = annulus_table(args.eps_list or [0.3, 0.1, 0.03])
        path = write_table(prefix.with_suffix(".csv"), ANNULUS_HEADER, rows)
        for r in rows:
            rel = max(abs(r[1] - r[2]) / r[1], abs(r[3] - r[4]) / r[3])
            _emit(args, f"eps={r[0]:<8g} |f|^2={r[1]:.10f} |grad f|^2={r[3]:.10f} ratio={r[5]:.6f} rel.err={rel:.1e}")
        _emit(args, f"wrote {path}")
        _sidecar(prefix, args, argv)
        return 0

    oracle = make_oracle(args)

    if cmd == "pixelate":
        pd = pixelate(oracle, args.n)
        if pd.empty:
            raise EmptyPixelationError(f"pixelation of {oracle.label} at n={args.n} is empty")
        files = list(write_pbm(pd, prefix))
        if args.mtx:
            mesh = triangulate(pd, args.m)
            files.append(write_vtk(mesh, prefix.with_suffix(".vtk")))
            files.extend(write_matrix_market(assemble(mesh), prefix))
        _emit(args, f"{oracle.label} n={args.n}: {len(pd)} pixels, {len(components(pd))} component(s)")
        _emit(args, "wrote " + ", ".join(str(f) for f in files))

    elif cmd == "spectrum":
        limits = Limits(m_max=args.m_max if args.m_max is not None else 6, M_max=args.M_max, dense_cap=args.dense_cap)
        kw = dict(limits=limits, C0=args.C0, q_mode=args.q_mode, grad_tol=args.grad_tol)
        if args.target_eps is not None:
            pd = pixelate(oracle, args.n, truncate=True)
            if pd.empty:
                raise EmptyPixelationError(f"pixelation of {oracle.label} at n={args.n} is empty")
            enc = gamma_pix(pd, args.target_eps, **kw)
        else:
            enc = gamma_n(oracle, args.n, **kw)
        path = enc.write(prefix.with_suffix(".json"))
        _emit(args, f"{oracle.label} n={args.n}: radius {enc.aw_radius:.4g} (requested {enc.eps_requested:.4g}), "
                    f"certified={enc.certified}")
        _emit(args, f"{'k':>4} {'lower':>16} {'upper':>16}")
        for iv in enc.intervals:
            _emit(args, f"{iv.k:>4} {iv.lower:>16.10f} {iv.upper:>16.10f}")
        for note in enc.notes:
            _emit(args, f"note: {note}")
        _emit(args, f"wrote {path}")

    elif cmd == "converge":
        tab = convergence_study(oracle, args.n_list, args.m_max, grad_tol=args.grad_tol,
                                precondition=args.precondition, max_iter=args.max_iter)
        path = tab.write(prefix.with_suffix(".csv"))
        for row in tab.rows:
            d = "" if row.diff is None else f"{row.diff:.6g}"
            _emit(args, f"n={row.n:<4} m={row.m} h={row.h:<10.6g} lambda_1={row.lam:.10f} diff={d} {row.status}")
        for n, rate in tab.fitted_rate.items():
            _emit(args, f"n={n}: fitted rate {rate:.4f}")
        _emit(args, f"wrote {path}")
        if any(r.status != "ok" for r in tab.rows):
            _sidecar(prefix, args, argv)
            return 1

    elif cmd == "mosco":
        reports = mosco_table(oracle, args.n_list)
        path = write_mosco(reports, prefix.with_suffix(".csv"))
        for rep in reports:
            _emit(args, f"n={rep.n:<4} l(n)={rep.l_n:.6f} domain={rep.dH_domain:.6f} boundary={rep.dH_boundary:.6f} "
                        f"Q~{rep.Q_estimate:.4f}")
        _emit(args, f"wrote {path}")

    elif cmd == "poincare":
        pd = pixelate(oracle, args.n)
        if pd.empty:
            raise EmptyPixelationError(f"pixelation of {oracle.label} at n={args.n} is empty")
        rep = poincare_check(pd, args.r, m=1 if args.m is None else args.m, trials=args.trials, seed=args.seed)
        path = prefix.with_suffix(".json")
        path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
        for w in rep.warnings:
            _emit(args, f"warning: {w}")
        _emit(args, f"max ratio {rep.max_ratio:.4f} over {rep.evaluated} samples -> {'PASS' if rep.passed else 'FAIL'}")
        _emit(args, f"wrote {path}")

    elif cmd == "fool":
        if args.oracle is None:
            oracle = oracle_square(0.0, math.pi)
        rep = fool_demo(oracle, args.n, args.eps_list, n_hi=args.n_hi)
        path = prefix.with_suffix(".json")
        path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
        _emit(args, f"{rep.queries} queries at n={rep.n_fixed}, answers identical: {rep.agreement}")
        _emit(args, f"base lambda_1 <= {rep.base_lambda1:.6f}")
        for e, lam in zip(rep.eps, rep.lambda1):
            _emit(args, f"eps={e:<8g} lambda_1 <= {lam:.6f}")
        _emit(args, "fooled" if rep.fooled else "not fooled")
        _emit(args, f"wrote {path}")

    elif cmd == "eigfun":
        pd = pixelate(oracle, args.n)
        if pd.empty:
            raise EmptyPixelationError(f"pixelation of {oracle.label} at n={args.n} is empty")
        res, mesh, files = eigenfunctions(pd, 0 if args.m is None else args.m, args.k_list, prefix,
                                          grad_tol=args.grad_tol, precondition=True)
        for k in sorted(set(args.k_list)):
            _emit(args, f"k={k} lambda={res.values[k - 1]:.10f}")
        _emit(args, "wrote " + ", ".join(str(f) for f in files))

    _sidecar(prefix, args, argv)
    return 0


NUMERIC_ERRORS = (
    DescentStalledError,
    BoundNotAchievedError,
    NotPositiveDefiniteError,
    EnclosureInvalidError,
    ExternalFormulaError,
    MeshTooCoarseError,
    EmptyPixelationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args, argv)
    except NUMERIC_ERRORS as exc:
        print(f"roughspec: numeric failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError) as exc:
        print(f"roughspec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
