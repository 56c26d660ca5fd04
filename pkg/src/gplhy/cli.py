"""Command line interface: ``gplhy <bounds|minimize|critical-mass|sweep|check>``.

Exit codes: 0 success, 1 argument error, 2 non-convergence (or failed
diagnostics for ``check``), 3 IO or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import math
import os
import sys

import numpy as np

from . import __version__, bounds
from .diagnostics import curve_checks, decay_fit, virial_check, yukawa_residual
from .energy import el_apply, energy_breakdown
from .grid import GridSpec
from .io import SnapshotError, read_snapshot, write_json, write_snapshot
from .kernel import KernelSpec
from .minimize import (
    BracketError,
    MinimizeOptions,
    auto_grid,
    critical_mass,
    energy_curve,
    eps_neg,
    minimize,
)
from .params import ReducedParams

EXIT_OK, EXIT_ARGS, EXIT_NOCONV, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("gplhy")


class ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _positive(name):
    def conv(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}")
        if not (math.isfinite(x) and x > 0):
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {text}")
        return x

    return conv


def _box(text):
    parts = [p for p in text.replace("x", ",").split(",") if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--box takes one length or three comma-separated lengths, got {text!r}")
    if len(vals) == 1:
        vals = vals * 3
    if len(vals) != 3 or not all(math.isfinite(v) and v > 0 for v in vals):
        raise argparse.ArgumentTypeError(f"--box takes one length or three positive lengths, got {text!r}")
    return tuple(vals)


def _add_grid(p):
    p.add_argument("--nx", type=int, default=None, help="samples along x (default: automatic)")
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--nz", type=int, default=None, help="samples along the dipole axis")
    p.add_argument("--box", type=_box, default=None, help="box length L or Lx,Ly,Lz (default: from the ansatz)")


def _add_solver(p):
    p.add_argument("--tol", type=_positive("--tol"), default=1e-6)
    p.add_argument("--max-iter", type=int, default=50000)
    p.add_argument("--init", default="ansatz", help="ansatz | file | random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state", default=None, help="snapshot used by --init file (and by check)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gplhy", description="Dipolar droplets with a quintic correction: bounds and ground states.")
    p.add_argument("--version", action="version", version=f"gplhy {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("bounds", help="analytic and numeric bounds on the critical mass")
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--out", default=None)

    s = sub.add_parser("minimize", help="compute a ground-state candidate")
    s.add_argument("--b", type=_positive("--b"), required=True)
    s.add_argument("--lambda", dest="lam", type=_positive("--lambda"), required=True)
    _add_grid(s)
    _add_solver(s)
    s.add_argument("--out", default=None, help="snapshot path")
    s.add_argument("--report", default=None, help="JSON report path (default: stdout)")

    s = sub.add_parser("critical-mass", help="bisection for the critical mass")
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--rel-tol", type=_positive("--rel-tol"), default=0.02)
    _add_grid(s)
    _add_solver(s)
    s.add_argument("--out", default=None, help="CSV of predicate evaluations (default: stdout)")
    s.add_argument("--report", default=None)

    s = sub.add_parser("sweep", help="energy curve over a range of masses")
    s.add_argument("--b", type=_positive("--b"), required=True)
    s.add_argument("--lambda-min", type=_positive("--lambda-min"), required=True)
    s.add_argument("--lambda-max", type=_positive("--lambda-max"), required=True)
    s.add_argument("--steps", type=int, default=9)
    _add_grid(s)
    _add_solver(s)
    s.add_argument("--format", choices=("json", "csv"), default="csv")
    s.add_argument("--out", default=None)
    s.add_argument("--report", default=None)

    s = sub.add_parser("check", help="diagnostics on a saved state")
    s.add_argument("--state", required=True)
    s.add_argument("--b", type=_positive("--b"), default=None, help="default: the value stored in the snapshot")
    s.add_argument("--report", default=None)
    return p


# ------------------------------------------------------------------ helpers


def _grid(args, lam: float, b: float) -> GridSpec:
    base = auto_grid(lam, b)
    n = tuple(v if v is not None else d for v, d in zip((args.nx, args.ny, args.nz), base.n))
    for v in n:
        if v < 8 or v % 2:
            raise ArgumentError(f"grid sizes must be even and >= 8, got {n}")
    if args.box is not None:
        return GridSpec(n, args.box)
    if n != base.n:
        # keep the automatic box, change only the sampling
        return GridSpec(n, base.L)
    return base


def _options(args) -> MinimizeOptions:
    if args.max_iter < 1:
        raise ArgumentError("--max-iter must be >= 1")
    init = args.init
    try:
        return MinimizeOptions(tol=args.tol, max_iter=args.max_iter, init=init, seed=args.seed, init_path=args.state)
    except ValueError as exc:
        raise ArgumentError(str(exc))


def _bounds_block(b: float) -> dict:
    if b <= 1:
        return {"note": "bounds need b > 1"}
    return bounds.bounds_report(b).as_dict()


def diagnostics_block(psi, b: float, lam: float, spec: KernelSpec | None = None) -> dict:
    """Energy, mu, residual, virial, Yukawa and decay for a field."""
    spec = KernelSpec.dipolar() if spec is None else spec
    m = spec.multiplier()
    eb = energy_breakdown(psi, b, m)
    el = el_apply(psi, b, m)
    vir = virial_check(eb, el.mu, lam)
    doc = {
        "energy": eb.as_dict(),
        "mu": el.mu,
        "residual": el.residual,
        "virial": {**vir.as_dict(), "max_residual": vir.max_residual},
        "yukawa_residual": None,
        "decay": {"t_fit": None, "r2": None},
    }
    if el.mu < 0:
        doc["yukawa_residual"] = yukawa_residual(psi, el.mu, b, m)
        try:
            doc["decay"] = decay_fit(psi, el.mu).as_dict()
        except ValueError as exc:
            doc["decay"] = {"t_fit": None, "r2": None, "error": str(exc)}
    return doc


def _check_writable(*paths) -> None:
    """Fail before a long computation if an output path cannot be written."""
    for path in paths:
        if path in (None, "-"):
            continue
        parent = os.path.dirname(os.path.abspath(path)) or "."
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise OSError(f"cannot write to {path}")
        if os.path.isdir(path):
            raise OSError(f"{path} is a directory")


def _grid_doc(g: GridSpec) -> dict:
    return {"n": list(g.n), "L": list(g.L), "spacing": list(g.spacing)}


def _emit_csv(path, header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    if path in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


# ------------------------------------------------------------------ commands


def cmd_bounds(args) -> int:
    if not args.b > 1:
        raise ArgumentError(f"bounds need b > 1 (got b={args.b})")
    rep = bounds.bounds_report(args.b)
    d = rep.as_dict()
    if args.format == "json":
        write_json(args.out, d)
    else:
        keys = [k for k in d if k != "discrepancy_note"]
        _emit_csv(args.out, keys, [[d[k] for k in keys]])
    return EXIT_OK


def cmd_minimize(args) -> int:
    grid = _grid(args, args.lam, args.b)
    opts = _options(args)
    _check_writable(args.out, args.report)
    res = minimize(ReducedParams(args.b, args.lam), grid, KernelSpec.dipolar(), opts)
    bound = res.bound
    doc = {
        "b": args.b,
        "lambda": args.lam,
        "grid": _grid_doc(grid),
        "iterations": res.iterations,
        "converged": res.converged,
        "message": res.message,
        "binding": bound,
        "eps_neg": eps_neg(args.lam),
        "seconds": res.seconds,
    }
    doc.update(diagnostics_block(res.field, args.b, args.lam))
    doc["bounds"] = _bounds_block(args.b)
    doc["version"] = __version__
    if not bound:
        doc["flag"] = "no binding detected"
    if args.out:
        write_snapshot(args.out, res.field, args.b, args.lam)
    write_json(args.report, _order(doc))
    if res.converged or (not bound and res.breakdown.E >= -eps_neg(args.lam)):
        return EXIT_OK
    return EXIT_NOCONV


def _order(doc: dict) -> dict:
    keys = ["b", "lambda", "grid", "energy", "mu", "residual", "iterations", "converged", "virial",
            "yukawa_residual", "decay", "bounds", "version"]
    out = {k: doc[k] for k in keys if k in doc}
    out.update({k: v for k, v in doc.items() if k not in out})
    return out


def cmd_critical_mass(args) -> int:
    if not args.b > 1:
        raise ArgumentError(f"critical mass needs b > 1 (got b={args.b})")
    opts = _options(args)
    _check_writable(args.out, args.report)

    def grid_for(lam):
        return _grid(args, lam, args.b)

    try:
        res = critical_mass(args.b, grid_for, KernelSpec.dipolar(), opts, rel_tol=args.rel_tol)
    except BracketError as exc:
        print(f"gplhy: {exc}", file=sys.stderr)
        _emit_csv(args.out, ["lambda", "E_min", "bound"], [[l, e, e < -eps_neg(l)] for l, e in exc.evaluations])
        return EXIT_NOCONV
    _emit_csv(args.out, ["lambda", "E_min", "bound"], [[r["lambda"], r["E_min"], r["bound"]] for r in res.as_rows()])
    doc = {
        "b": args.b,
        "lambda_c_estimate": res.lambda_c_estimate,
        "bracket": list(res.bracket),
        "rel_width": res.rel_width,
        "evaluations": res.as_rows(),
        "bounds": _bounds_block(args.b),
        "version": __version__,
    }
    if args.report:
        write_json(args.report, doc)
    else:
        print(f"lambda_c estimate {res.lambda_c_estimate:.6g} in [{res.bracket[0]:.6g}, {res.bracket[1]:.6g}]",
              file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.steps < 2:
        raise ArgumentError("--steps must be >= 2")
    if not args.lambda_max > args.lambda_min:
        raise ArgumentError("--lambda-max must exceed --lambda-min")
    lams = np.linspace(args.lambda_min, args.lambda_max, args.steps)
    grid = _grid(args, float(lams[-1]), args.b)
    opts = _options(args)
    _check_writable(args.out, args.report)
    curve = energy_curve(args.b, lams, grid, KernelSpec.dipolar(), opts)
    rows = [[p.lam, p.E, p.mu, p.converged] for p in curve]
    rep = curve_checks(curve)
    if args.format == "csv":
        _emit_csv(args.out, ["lambda", "E", "mu", "converged"], rows)
    else:
        write_json(args.out, {"rows": [dict(zip(["lambda", "E", "mu", "converged"], r)) for r in rows]})
    if args.report:
        write_json(args.report, {"b": args.b, "grid": _grid_doc(grid), "checks": rep.as_dict(),
                                 "version": __version__})
    if not rep.ok:
        print(f"gplhy: curve checks flagged violations: {rep.as_dict()}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    snap = read_snapshot(args.state)
    b = snap.b if args.b is None else args.b
    psi = snap.field
    lam = psi.mass()
    doc = {"b": b, "lambda": lam, "lambda_stored": snap.lam, "grid": _grid_doc(psi.grid)}
    doc.update(diagnostics_block(psi, b, lam))
    E = doc["energy"]["total"]
    mu = doc["mu"]
    decay = doc["decay"]
    flags = {
        "mass_matches": abs(lam - snap.lam) <= 1e-10 * snap.lam,
        "negative_energy": E < -eps_neg(lam),
        "mu_negative": mu < 0,
        "virial": doc["virial"]["max_residual"] < 1e-2,
        "yukawa": doc["yukawa_residual"] is not None and doc["yukawa_residual"] < 1e-3,
        "decay": decay.get("t_fit") is not None and decay["t_fit"] > 0 and decay["r2"] > 0.98
        and decay["t_fit"] >= 0.3 * math.sqrt(-mu),
    }
    doc["flags"] = flags
    doc["passed"] = all(flags.values())
    doc["iterations"] = None
    doc["converged"] = None
    doc["bounds"] = _bounds_block(b) if b > 1 else {"note": "bounds need b > 1"}
    doc["version"] = __version__
    write_json(args.report, _order(doc))
    return EXIT_OK if doc["passed"] else EXIT_NOCONV


COMMANDS = {
    "bounds": cmd_bounds,
    "minimize": cmd_minimize,
    "critical-mass": cmd_critical_mass,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ArgumentError as exc:
        print(f"gplhy: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ArgumentError as exc:
        print(f"gplhy: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except SnapshotError as exc:
        print(f"gplhy: format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"gplhy: IO error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
