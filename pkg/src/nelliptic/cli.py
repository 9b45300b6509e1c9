"""Command-line front end: reproducible experiments over stable file formats.

Subcommands
-----------
probe      ellipticity probe of an operator (structure constants, sandwich
           certification, modulus samples)
solve      Dirichlet solves (linear / pucci / ma / mc) writing grid files
analyze    pointwise decay table and Holder exponent at a point
check      discrete viscosity verdicts of a grid function against an operator
abp        maximum-principle ratio sup u^- vs ||f^+||_{L^n(contact)}
normalize  section + enclosing-ellipsoid normalization across heights
fixtures   list fixtures / evaluate one at a point

Reports are JSON lines on stdout; each record carries its resolved
configuration, so a single record suffices to rerun. Identical argv and seeds
produce byte-identical streams. Exit codes: 0 success, 2 usage error,
3 numeric failure (the error is emitted as a report record).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fixtures as fixtures_mod
from . import geometry, regularity, solver
from .errors import NellipticError, ParameterError
from .grid import GridFunction, read_grid, write_grid
from .operators import (
    DEFAULT_PROBE_RHO,
    OperatorSpec,
    ellipticity_probe,
    shift,
)
from .polyfit import Polynomial
from .regularity import CampanatoConfig

# ---------------------------------------------------------------------------
# boundary-expression mini-language: polynomials in x1, x2 and |x| (as r/abs)


class _ExprParser:
    """Recursive-descent parser for the boundary mini-language.

    Grammar: numbers, x1, x2 (x aliases x1), r (= |x|), abs(...), + - * / ^
    and parentheses. Deliberately no general function calls."""

    def __init__(self, text):
        self.text = text
        self.pos = 0

    def parse(self):
        node = self._expr()
        self._skip()
        if self.pos != len(self.text):
            raise ParameterError("trailing input in expression: %r" % self.text[self.pos :])
        return node

    def _skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _expr(self):
        node = self._term()
        while self._peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self._term()
            node = ("+" if op == "+" else "-", node, rhs)
        return node

    def _term(self):
        node = self._factor()
        while self._peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self._factor()
            node = (op, node, rhs)
        return node

    def _factor(self):
        # unary minus binds looser than ^, so -x1^2 means -(x1^2)
        ch = self._peek()
        if ch == "-":
            self.pos += 1
            return ("neg", self._factor())
        if ch == "+":
            self.pos += 1
            return self._factor()
        return self._power()

    def _power(self):
        node = self._atom()
        if self._peek() == "^":
            self.pos += 1
            exp = self._factor()  # right associative, sign allowed in exponent
            node = ("^", node, exp)
        return node

    def _atom(self):
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            node = self._expr()
            if self._peek() != ")":
                raise ParameterError("missing ) in expression")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"
                or (self.text[self.pos] in "+-" and self.text[self.pos - 1] in "eE")
            ):
                self.pos += 1
            return ("num", float(self.text[start : self.pos]))
        if ch.isalpha():
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "_"
            ):
                self.pos += 1
            name = self.text[start : self.pos]
            if name == "abs":
                if self._peek() != "(":
                    raise ParameterError("abs needs parentheses")
                self.pos += 1
                node = self._expr()
                if self._peek() != ")":
                    raise ParameterError("missing ) after abs")
                self.pos += 1
                return ("abs", node)
            if name in ("x", "x1", "x2", "r"):
                return ("var", name)
            raise ParameterError("unknown identifier %r in expression" % name)
        raise ParameterError("cannot parse expression at %r" % self.text[self.pos :])


def _eval_expr(node, x):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        name = node[1]
        if name in ("x", "x1"):
            return float(x[0])
        if name == "x2":
            return float(x[1])
        return float(np.linalg.norm(x))
    if kind == "neg":
        return -_eval_expr(node[1], x)
    if kind == "abs":
        return abs(_eval_expr(node[1], x))
    a = _eval_expr(node[1], x)
    b = _eval_expr(node[2], x)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    if kind == "^":
        return a**b
    raise ParameterError("bad expression node %r" % (kind,))


def parse_expression(text):
    tree = _ExprParser(text).parse()
    return lambda x: _eval_expr(tree, np.atleast_1d(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# report stream


def _emit(record, kind, config):
    rec = {"kind": kind, "config": config}
    rec.update(record)
    sys.stdout.write(json.dumps(rec, sort_keys=True) + "\n")


def _config_of(args, keys):
    out = {}
    for k in keys:
        v = getattr(args, k.replace("-", "_"), None)
        out[k] = v
    out["threads"] = args.threads
    return out


def _parse_point(text, dim=None):
    pt = tuple(float(v) for v in text.split(","))
    if dim is not None and len(pt) != dim:
        raise ParameterError("point %r has wrong dimension (need %d)" % (text, dim))
    return pt


def _load_field(spec, like: GridFunction, fixture=None):
    """Right-hand sides and data fields: a constant, a grid file, or the
    fixture's own rhs ("rhs")."""
    if spec == "rhs":
        if fixture is None or fixture.rhs_fn is None:
            raise ParameterError("'rhs' needs a fixture with a right-hand side")
        vals = np.array([fixture.rhs(x) for x in like.points()]).reshape(like.shape)
        return GridFunction(like.dim, like.shape, like.origin, like.spacing, vals)
    try:
        const = float(spec)
        return GridFunction(
            like.dim, like.shape, like.origin, like.spacing, np.full(like.shape, const)
        )
    except ValueError:
        pass
    return read_grid(spec)


def _grid_from_args(args, dim=2):
    if getattr(args, "grid", None):
        return read_grid(args.grid)
    if not getattr(args, "box", None) or not getattr(args, "h", None):
        raise ParameterError("need --grid FILE or --box lo,hi with --h")
    lo, hi = (float(v) for v in args.box.split(","))
    return GridFunction.from_box([lo] * dim, [hi] * dim, args.h, dim=dim)


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_probe(args):
    op = OperatorSpec.parse(args.op)
    if args.shift_identity:
        op = shift(op, Polynomial.half_square_norm(args.n), normalize_origin=True)
    rho = args.rho if args.rho is not None else DEFAULT_PROBE_RHO[op.family]
    sc = ellipticity_probe(
        op, rho, args.n, samples=args.samples, seed=args.seed, pairs=args.pairs
    )
    cfg = _config_of(args, ["op", "rho", "n", "samples", "seed", "pairs", "shift_identity"])
    cfg["rho"] = rho
    _emit(sc.to_dict(), "probe", cfg)
    return 0


def _cmd_solve(args):
    f_like = _grid_from_args(args)
    f = _load_field(args.f, f_like)
    gtext = args.g
    try:
        g = float(gtext)
    except ValueError:
        if os.path.exists(gtext):
            g = read_grid(gtext)
        else:
            g = parse_expression(gtext)
    config = solver.SolveConfig(
        stencil_directions=args.stencil, tol=args.tol, max_iters=args.max_iters
    )
    if args.eq == "linear":
        tri = [float(v) for v in args.A.split(",")] if args.A else [1.0, 0.0, 1.0]
        A = np.array([[tri[0], tri[1]], [tri[1], tri[2]]])
        b = [float(v) for v in args.b.split(",")] if args.b else None
        u = solver.solve_linear(A, b, f, g, config)
        info = {"iterations": 1, "residual": 0.0}
    elif args.eq == "pucci":
        u = solver.solve_pucci(args.lam, args.Lam, args.sign, f, g, config)
        info = u._solve_info
    elif args.eq == "ma":
        u = solver.solve_monge_ampere(f, g, config)
        info = u._solve_info
    elif args.eq == "mc":
        u = solver.solve_mean_curvature(f, g, delta_guard=args.guard, config=config)
        info = {"iterations": None, "residual": None}
    else:
        raise ParameterError("unknown equation %r" % args.eq)
    write_grid(u, args.out)
    cfg = _config_of(
        args,
        ["eq", "grid", "box", "h", "f", "g", "out", "stencil", "tol", "max_iters",
         "A", "b", "lam", "Lam", "sign", "guard"],
    )
    rec = {"out": args.out, "shape": list(u.shape), "spacing": u.spacing}
    rec.update({k: v for k, v in info.items() if k != "history"})
    if "history" in info:
        rec["residual_history"] = info["history"]
    _emit(rec, "solve", cfg)
    return 0


def _analysis_input(args):
    fixture = None
    if args.fixture:
        fixture = fixtures_mod.parse_fixture(args.fixture)
        u = fixture
    elif args.input:
        u = read_grid(args.input)
    else:
        raise ParameterError("need --input FILE or --fixture name:theta")
    return u, fixture


def _cmd_analyze(args):
    u, fixture = _analysis_input(args)
    dim = u.dim
    x0 = _parse_point(args.point, dim)
    constraint = None
    if args.constrain:
        opspec, _, f0 = args.constrain.rpartition(":")
        constraint = (OperatorSpec.parse(opspec), float(f0))
    cfg = CampanatoConfig(
        k=args.degree,
        r0=args.r0,
        levels=args.levels,
        eta=args.eta,
        constraint=constraint,
        norm_bound=args.norm_bound,
        samples_m=args.samples_m,
        threads=args.threads,
    )
    report = regularity.campanato_table(u, x0, cfg)
    conf = _config_of(
        args,
        ["input", "fixture", "point", "degree", "eta", "r0", "levels",
         "constrain", "norm_bound", "samples_m"],
    )
    _emit(report.to_dict(), "regularity", conf)
    if args.csv:
        osc = regularity.oscillation_profile(u, x0, [s.r for s in report.scales])
        with open(args.csv, "w") as fh:
            fh.write("r,E,osc\n")
            for row, (_, o) in zip(report.scales, osc):
                fh.write("%r,%r,%r\n" % (row.r, row.error, o))
    return 0


def _cmd_check(args):
    fixture = None
    if args.fixture:
        fixture = fixtures_mod.parse_fixture(args.fixture)
        like = _grid_from_args(args, dim=fixture.dim)
        vals = np.array([fixture(x) for x in like.points()]).reshape(like.shape)
        u = GridFunction(like.dim, like.shape, like.origin, like.spacing, vals)
    else:
        if not args.input:
            raise ParameterError("need --input FILE or --fixture name:theta")
        u = read_grid(args.input)
    if args.op:
        op = OperatorSpec.parse(args.op)
    elif fixture is not None and fixture.operator is not None:
        op = fixture.operator
    else:
        raise ParameterError("check needs --op (or a fixture with an operator)")
    f = _load_field(args.f, u, fixture)
    report = regularity.check_viscosity(
        u, op, f, side=args.side, tol=args.tol, rho=args.rho
    )
    conf = _config_of(
        args, ["input", "fixture", "op", "f", "side", "tol", "rho", "grid", "box", "h"]
    )
    rec = {
        "counts": {"sub": report.counts("sub"), "super": report.counts("super")},
        "witnesses": report.witnesses[:16],
        "nodes_tested": len(report.nodes),
    }
    _emit(rec, "viscosity", conf)
    return 0


def _cmd_abp(args):
    u = read_grid(args.input)
    f = _load_field(args.f, u)
    rec = geometry.abp_check(u, f, args.lam, args.Lam, args.b0)
    conf = _config_of(args, ["input", "f", "lam", "Lam", "b0"])
    _emit(rec, "abp", conf)
    return 0


def _cmd_normalize(args):
    u, fixture = _analysis_input(args)
    x0 = _parse_point(args.point, u.dim)
    heights = [float(v) for v in args.heights.split(",")]
    conf = _config_of(args, ["input", "fixture", "point", "heights", "rays"])
    for h in heights:
        verts = geometry.section(u, x0, h, rays=args.rays)
        norm = geometry.john_normalize(verts, h, u.dim)
        rec = norm.to_dict()
        del rec["vertices"]  # keep the stream compact; vertices via section users
        rec["n_vertices"] = len(verts)
        _emit(rec, "normalize", conf)
    return 0


def _cmd_fixtures(args):
    if args.action == "list":
        for name in fixtures_mod.fixture_names():
            _emit({"fixture": name}, "fixtures", {"action": "list", "threads": args.threads})
        for claim in fixtures_mod.fixture_claims():
            _emit(claim, "fixture_claim", {"action": "list", "threads": args.threads})
        return 0
    if args.action == "eval":
        fix = fixtures_mod.parse_fixture(args.fixture)
        x = np.asarray(_parse_point(args.point, fix.dim))
        rec = {"fixture": args.fixture, "point": list(x), "value": fix(x)}
        if not fix.is_singular(x, order=1):
            rec["grad"] = [float(v) for v in fix.grad(x)]
        if not fix.is_singular(x, order=2):
            rec["hess"] = [[float(v) for v in row] for row in fix.hess(x)]
        if fix.rhs_fn is not None:
            rec["rhs"] = fix.rhs(x)
        _emit(rec, "fixtures", _config_of(args, ["action", "fixture", "point"]))
        return 0
    raise ParameterError("fixtures action must be list or eval")


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nelliptic",
        description="Locally uniformly elliptic operators: probes, solvers, "
        "and pointwise regularity estimation.",
    )
    ap.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("NELLIPTIC_THREADS", "1")),
        help="worker threads for per-scale fits (default 1, reproducible)",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", help="ellipticity probe of an operator")
    p.add_argument("--op", required=True, help="pucci+:1:2, sigma:2, quotient:3:1, mc, ma, slag, linear:<A>")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--samples", type=int, default=160)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=80)
    p.add_argument(
        "--shift-identity",
        action="store_true",
        help="probe the operator shifted by |x|^2/2 (uniformly elliptic "
        "representative of the cone families)",
    )
    p.set_defaults(fn=_cmd_probe)

    p = sub.add_parser("solve", help="Dirichlet solves on a box")
    p.add_argument("--eq", required=True, choices=["linear", "pucci", "ma", "mc"])
    p.add_argument("--grid", help="grid file fixing the domain and f-layout")
    p.add_argument("--box", help="lo,hi (same for both axes)")
    p.add_argument("--h", type=float)
    p.add_argument("--f", default="0", help="constant, grid file, or 'rhs'")
    p.add_argument("--g", required=True, help="boundary: expression, constant or grid file")
    p.add_argument("--out", required=True)
    p.add_argument("--A", help="linear: upper triangle a11,a12,a22")
    p.add_argument("--b", help="linear: drift b1,b2")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--Lambda", dest="Lam", type=float, default=1.0)
    p.add_argument("--sign", choices=["plus", "minus"], default="minus")
    p.add_argument("--guard", type=float, default=0.1)
    p.add_argument("--stencil", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=80)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("analyze", help="pointwise decay table at a point")
    p.add_argument("--input", help="grid file")
    p.add_argument("--fixture", help="fixture spec name:theta")
    p.add_argument("--point", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--r0", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--constrain", help="op:f0, e.g. ma:1.0")
    p.add_argument("--norm-bound", type=float, default=None)
    p.add_argument("--samples-m", type=int, default=8)
    p.add_argument("--csv", help="write r,E,osc rows to this file")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("check", help="discrete viscosity verdicts")
    p.add_argument("--input", help="grid file with u")
    p.add_argument("--fixture", help="sample this fixture instead (needs --box/--h)")
    p.add_argument("--grid")
    p.add_argument("--box")
    p.add_argument("--h", type=float)
    p.add_argument("--op", help="operator spec; defaults to the fixture's")
    p.add_argument("--f", default="0", help="constant, grid file, or 'rhs'")
    p.add_argument("--side", choices=["sub", "super", "both"], default="both")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument(
        "--rho",
        type=float,
        default=None,
        help="admissible test class bound |D^2 phi|, |D phi| <= rho",
    )
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("abp", help="maximum-principle ratio on the inscribed ball")
    p.add_argument("--input", required=True)
    p.add_argument("--f", default="0")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--Lambda", dest="Lam", type=float, required=True)
    p.add_argument("--b0", type=float, default=0.0)
    p.set_defaults(fn=_cmd_abp)

    p = sub.add_parser("normalize", help="section normalization across heights")
    p.add_argument("--input")
    p.add_argument("--fixture")
    p.add_argument("--point", default="0,0")
    p.add_argument("--heights", required=True, help="comma list of section heights h")
    p.add_argument("--rays", type=int, default=256)
    p.set_defaults(fn=_cmd_normalize)

    p = sub.add_parser("fixtures", help="list fixtures or evaluate one")
    p.add_argument("action", choices=["list", "eval"])
    p.add_argument("--fixture")
    p.add_argument("--point", default="0,0")
    p.set_defaults(fn=_cmd_fixtures)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except NellipticError as exc:
        _emit(
            {"error": type(exc).__name__, "message": str(exc)},
            "error",
            {"argv": list(argv) if argv is not None else sys.argv[1:]},
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
