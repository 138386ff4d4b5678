"""Command-line entry point: ``varharm <subcommand> ...``.

Results go to stdout as JSON, diagnostics to stderr.  ``verify`` exits with
0 (pass), 1 (fail) or 2 (inconclusive); invalid input exits with 3.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from . import atoms as at
from . import harness as hs
from . import lebesgue as lb
from . import maximal as mx
from . import potentials as pt
from . import weights as wt
from .errors import VarharmError
from .grid import Ball, Grid, indicator, read_csv, write_csv

ERROR_EXIT = 3


def _grid(args) -> Grid:
    return Grid(args.n, args.L, args.N)


def load_function(spec: str, grid: Grid, seed: int = 42):
    """``random``, ``ball:<radius>`` or a CSV path written by :func:`write_csv`."""
    kind, _, arg = spec.partition(":")
    if kind == "random":
        return mx.random_test_function(grid, np.random.default_rng(seed))
    if kind == "ball":
        return indicator(grid, Ball(tuple([0.0] * grid.n), float(arg)))
    f = read_csv(spec)
    if f.grid != grid:
        raise VarharmError(f"{spec} holds a function on {f.grid}, expected {grid}")
    return f


def load_weight(spec: str, grid: Grid) -> wt.Weight:
    named = hs.a1_weights(grid)
    if spec in named:
        return named[spec]
    return wt.Weight.from_function(load_function(spec, grid))


def _operator(args) -> pt.OperatorSpec:
    if args.operator:
        return pt.OperatorSpec.from_json(args.operator, args.alpha)
    if args.m == 1:
        return pt.OperatorSpec.riesz(args.n, args.alpha)
    return pt.OperatorSpec.reflection_pair(args.n, args.alpha)


def _summary(f) -> dict:
    v = f.values
    return {"sup": float(np.max(np.abs(v))), "l1": float(np.sum(np.abs(v)) * f.grid.cell_volume)}


def _emit(obj) -> None:
    json.dump(hs._jsonable(obj), sys.stdout, indent=2)
    sys.stdout.write("\n")


# --- subcommands ---------------------------------------------------------------

def cmd_list(args) -> int:
    _emit({name: c.description for name, c in hs.REGISTRY.items()})
    return 0


def cmd_verify(args) -> int:
    override = dict(n=args.n, N=args.N, L=args.L, seed=args.seed, alpha=args.alpha, exponent=args.exponent,
                    out=args.out, csv_dir=args.csv)
    if args.two_d:
        override.update(n=2, N=args.N or 128, L=args.L or 4.0)
    if args.config:
        cfg = hs.ExperimentConfig.from_json(args.config, target=args.target, **override)
    else:
        cfg = hs.ExperimentConfig.from_dict({"target": args.target, **{k: v for k, v in override.items()
                                                                        if v is not None}})
    print(f"running {cfg.target} at N={cfg.N} and {2 * cfg.N}", file=sys.stderr)
    report = hs.run(cfg)
    _emit({k: v for k, v in report.to_dict().items() if k != "cases"} | {"cases": len(report.cases)})
    print(f"{cfg.target}: {report.verdict} ({report.wall_time:.1f} s)", file=sys.stderr)
    return report.exit_code


def cmd_maximal(args) -> int:
    grid = _grid(args)
    f = load_function(args.function, grid, args.seed)
    if args.op == "hl":
        out = mx.hl_maximal(f)
    elif args.op == "centered":
        out = mx.centered_maximal(f)
    elif args.op == "frac":
        out = mx.fractional_maximal(f, args.alpha, mx.BallFamily.ladder(grid))
    elif args.op == "discrete":
        out = mx.discrete_maximal(f, mx.default_bank(grid.n)[0])
    else:
        out = mx.grand_maximal(f)
    if args.out:
        write_csv(out, args.out)
    _emit({"op": args.op, "input": _summary(f), "output": _summary(out)})
    return 0


def cmd_weights(args) -> int:
    grid = _grid(args)
    w = load_weight(args.weight, grid)
    if args.check == "a1":
        value = wt.a1_constant(w)
    elif args.check == "ap":
        value = wt.ap_constant(w, args.p)
    elif args.check == "apq":
        value = wt.apq_constant(w, args.p, args.q)
    else:
        s = args.s if args.s is not None else wt.a1_rh_exponent(grid.n, wt.a1_constant(w))
        value = wt.rh_constant(w, s)
    _emit({"check": args.check, "weight": args.weight, "constant": value})
    return 0


def cmd_rdf(args) -> int:
    grid = _grid(args)
    p = lb.parse_exponent(args.exponent, grid)
    q = lb.sobolev_shift(p, args.alpha)
    p_dual = lb.conjugate(lb.ExponentFunction(q.values / args.q0))
    g = load_function(args.function, grid, args.seed)
    family = mx.BallFamily.ladder(grid)
    m_norm = 2.0 * mx.estimate_operator_norm(p_dual, trials=args.trials, seed=args.seed, family=family)
    res = wt.rubio_de_francia(g, p_dual, m_norm, family=family)
    if args.out:
        write_csv(res.Rg.values, args.out)
    _emit(wt.rdf_summary(res))
    return 0 if not res.flagged else 1


def _make_atom(args, grid):
    p = lb.parse_exponent(args.exponent, grid)
    center = tuple(args.center) if args.center else tuple([0.0] * grid.n)
    return at.make_atom(Ball(center, args.radius), p, args.q, args.degree, seed=args.seed)


def _atom_args(sp):
    sp.add_argument("--radius", type=float, default=0.5)
    sp.add_argument("--center", type=float, nargs="+")
    sp.add_argument("--q", type=float, default=64.0, help="atom integrability exponent")
    sp.add_argument("--degree", type=int, default=0, help="highest vanishing moment order")


def cmd_atom(args) -> int:
    grid = _grid(args)
    a = _make_atom(args, grid)
    if args.out:
        write_csv(a.values, args.out)
    _emit(at.validate_atom(a).as_dict() | {"chi_norm": a.chi_norm})
    return 0


def cmd_potential(args) -> int:
    grid = _grid(args)
    spec = _operator(args)
    f = load_function(args.function, grid, args.seed)
    Tf = pt.apply(spec, f)
    if args.out:
        write_csv(Tf, args.out)
    _emit({"operator": spec.to_dict(), "input": _summary(f), "output": _summary(Tf)})
    return 0


def cmd_farfield(args) -> int:
    grid = _grid(args)
    spec = _operator(args)
    a = _make_atom(args, grid)
    rep = pt.far_field_check(spec, a)
    _emit(rep.as_dict())
    return 0 if rep.passed and rep.budget_ok else 1


def cmd_weaktype(args) -> int:
    grid = _grid(args)
    spec = _operator(args)
    f = load_function(args.function, grid, args.seed)
    w = load_weight(args.weight, grid)
    _emit(pt.weak_type_check(spec, f, w).as_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varharm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def grid_args(sp, defaults=True):
        sp.add_argument("--n", type=int, default=1 if defaults else None, choices=(1, 2))
        sp.add_argument("--L", type=float, default=8.0 if defaults else None)
        sp.add_argument("--N", type=int, default=1024 if defaults else None)
        sp.add_argument("--seed", type=int, default=42 if defaults else None)

    def op_args(sp):
        sp.add_argument("--alpha", type=float, default=0.5)
        sp.add_argument("--m", type=int, default=1, choices=(1, 2), help="1: Riesz potential, 2: reflection pair")
        sp.add_argument("--operator", help="JSON operator file (overrides --m)")

    sp = sub.add_parser("list", help="registered verification targets")
    sp.set_defaults(fn=cmd_list)

    sp = sub.add_parser("verify", help="run one registered verification")
    sp.add_argument("target")
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.add_argument("--csv", metavar="DIR")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--exponent")
    sp.add_argument("--2d", dest="two_d", action="store_true", help="planar variant (n=2, N=128, L=4)")
    grid_args(sp, defaults=False)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("maximal", help="apply a maximal operator")
    grid_args(sp)
    sp.add_argument("--op", choices=("hl", "centered", "frac", "discrete", "grand"), default="hl")
    sp.add_argument("--function", default="random")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_maximal)

    sp = sub.add_parser("weights", help="Muckenhoupt and reverse Hölder constants")
    grid_args(sp)
    sp.add_argument("--check", choices=("a1", "ap", "apq", "rh"), default="a1")
    sp.add_argument("--weight", default="power", help="one, power, decay or a CSV path")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--s", type=float)
    sp.set_defaults(fn=cmd_weights)

    sp = sub.add_parser("rdf", help="Rubio de Francia majorant with certificate")
    grid_args(sp)
    sp.add_argument("--exponent", default="radial:bump")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--q0", type=float, default=0.857)
    sp.add_argument("--function", default="random")
    sp.add_argument("--trials", type=int, default=16)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_rdf)

    sp = sub.add_parser("atom", help="build and validate an atom")
    grid_args(sp)
    sp.add_argument("--exponent", default="radial:bump")
    _atom_args(sp)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_atom)

    sp = sub.add_parser("potential", help="apply T_{alpha,m}")
    grid_args(sp)
    op_args(sp)
    sp.add_argument("--function", default="ball:1")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_potential)

    sp = sub.add_parser("farfield", help="far-field decay of T_{alpha,m} on an atom")
    grid_args(sp)
    op_args(sp)
    sp.add_argument("--exponent", default="radial:bump")
    _atom_args(sp)
    sp.set_defaults(fn=cmd_farfield)

    sp = sub.add_parser("weaktype", help="weighted weak type constant")
    grid_args(sp)
    op_args(sp)
    sp.add_argument("--function", default="random")
    sp.add_argument("--weight", default="power")
    sp.set_defaults(fn=cmd_weaktype)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (VarharmError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"varharm: error: {exc}", file=sys.stderr)
        return ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
