"""Command-line driver.

Subcommands::

    liftprop eval   NETWORK                 forward values
    liftprop grad   NETWORK --method M      adjoints (backprop, bp-delta, bp-grid, fd)
    liftprop check  NETWORK                 reconcile all methods; exit 1 on any failure
    liftprop report NETWORK                 full JSON report (or figure data)
    liftprop dump   NETWORK                 converged message store as JSON

``--random N --seed S`` replaces NETWORK with a generated test network.
Exit status: 0 ok, 1 invariant failure, 2 usage error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .adjoint import cross_method_report, extract_adjoints_delta, extract_adjoints_smoothed
from .autodiff import EvaluationError, backprop, evaluate, finite_diff_gradient
from .bp import BPError, compute_posterior, run_bp, variable_grid
from .config import BPConfig, Flooding, Mode, TwoPass
from .corpus import random_network
from .lift import lift_network
from .messages import Direction, GridUnderflowError, trapezoid
from .netir import NetworkError, load_network

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("network", nargs="?", help="network file in the DSL")
    common.add_argument("--random", type=int, metavar="N",
                        help="use a random network with N function nodes instead of a file")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for --random and for Monte-Carlo fallbacks")
    common.add_argument("--kT", type=float, default=1.0)
    common.add_argument("--sigma", type=float, default=1e-3)
    common.add_argument("--grid-points", type=int, default=129)
    common.add_argument("--grid-span", type=float, default=8.0)
    common.add_argument("--quad-nodes", type=int, default=3)
    common.add_argument("--schedule", choices=["two-pass", "flooding"], default="two-pass")
    common.add_argument("--max-iters", type=int, default=200)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("-o", "--output", help="write to this file instead of stdout")
    common.add_argument("--format", choices=["text", "json", "csv"], default="text")

    parser = argparse.ArgumentParser(prog="liftprop", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate the network")

    p = sub.add_parser("grad", parents=[common], help="adjoints by one method")
    p.add_argument("--method", choices=["backprop", "bp-delta", "bp-grid", "fd"], default="backprop")
    p.add_argument("--h", type=float, default=1e-6, help="finite-difference step")
    p.add_argument("--dump-messages", metavar="PATH", help="also write the message store (bp methods)")
    p.add_argument("--experimental-prior-on", metavar="VAR",
                   help="attach the Boltzmann factor to VAR instead of the objective (exploratory)")

    for name, helptext in (("check", "reconcile every method"), ("report", "write the full report")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--h", type=float, default=1e-6)
        p.add_argument("--tol-exact", type=float, default=1e-9)
        p.add_argument("--tol-grid", type=float, default=2e-2)
        if name == "report":
            p.add_argument("--emit-figure", choices=["gauss-shift"],
                           help="write CSV figure data instead of the report")
            p.add_argument("--figure-var", metavar="VAR",
                           help="variable for --emit-figure (default: first input)")

    p = sub.add_parser("dump", parents=[common], help="write the converged message store")
    p.add_argument("--mode", choices=["exact", "grid"], default="exact")
    p.add_argument("--experimental-prior-on", metavar="VAR")
    return parser


def _config(args, mode=Mode.EXACT) -> BPConfig:
    sched = TwoPass() if args.schedule == "two-pass" else Flooding(args.max_iters, args.tol)
    return BPConfig(
        kT=args.kT, sigma=args.sigma, grid_points=args.grid_points, grid_span=args.grid_span,
        quad_nodes=args.quad_nodes, schedule=sched, mode=mode, seed=args.seed,
    )


def _network(args):
    if args.random is not None:
        if args.network:
            raise UsageError("give either a network file or --random, not both")
        if args.random < 0:
            raise UsageError("--random needs a non-negative count")
        return random_network(args.random, args.seed)
    if not args.network:
        raise UsageError("a network file (or --random N) is required")
    try:
        return load_network(args.network)
    except OSError as exc:
        raise UsageError(f"cannot read {args.network}: {exc.strerror}") from None


def _fmt(x):
    return "null" if x is None else repr(float(x))


def _table(values: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(values, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "value"])
        w.writerows((k, _fmt(v)) for k, v in values.items())
        return buf.getvalue()
    return "".join(f"{k} {_fmt(v)}\n" for k, v in values.items())


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bp(net, cfg, prior_on=None):
    fg = lift_network(net, cfg, boltzmann_on=prior_on)
    return fg, run_bp(fg, cfg)


def _cmd_eval(args, net):
    _emit(_table(dict(evaluate(net)), args.format), args.output)
    return EXIT_OK


def _cmd_grad(args, net):
    if args.h <= 0:
        raise UsageError("--h must be positive")
    prior_on = args.experimental_prior_on
    if prior_on is not None and args.method not in ("bp-delta", "bp-grid"):
        raise UsageError("--experimental-prior-on only applies to bp methods")
    if args.method == "backprop":
        adj = dict(backprop(net, evaluate(net)))
    elif args.method == "fd":
        adj = dict(finite_diff_gradient(net, args.h))
    else:
        cfg = _config(args, Mode.EXACT if args.method == "bp-delta" else Mode.GRID)
        fg, store = _bp(net, cfg, prior_on)
        if cfg.mode is Mode.EXACT:
            adj = extract_adjoints_delta(fg, store, cfg)
        else:
            adj = extract_adjoints_smoothed(fg, store, cfg)
        if args.dump_messages:
            _emit(json.dumps(_dump_payload(fg, store), indent=2) + "\n", args.dump_messages)
    _emit(_table(adj, args.format), args.output)
    return EXIT_OK


def _report(args, net):
    if args.h <= 0:
        raise UsageError("--h must be positive")
    return cross_method_report(net, _config(args), h=args.h,
                               tol_exact=args.tol_exact, tol_grid=args.tol_grid)


def _cmd_check(args, net):
    rep = _report(args, net)
    lines = []
    for name, rec in rep.variables.items():
        cells = " ".join(f"{k}={_fmt(v)}" for k, v in rec.items())
        lines.append(f"{name} {cells}\n")
    bad = [r for r in rep.residuals if r.residual > rep.thresholds["exact"]]
    bad_methods = [r for r in rep.method_residuals() if not r["pass"]]
    for r in bad:
        lines.append(f"FAIL invariant {r.kind} on ({r.var}, {r.factor}): residual {r.residual!r}\n")
    for r in bad_methods:
        lines.append(f"FAIL {r['method']} for {r['variable']}: residual {r['residual']!r} "
                     f"> {r['threshold']!r}\n")
    for method, msg in rep.failures.items():
        lines.append(f"FAIL {method}: {msg}\n")
    lines.append("PASS\n" if rep.passed else "FAIL\n")
    _emit("".join(lines), args.output)
    return EXIT_OK if rep.passed else EXIT_INVARIANT


def _gauss_shift_csv(args, net):
    var = args.figure_var or net.inputs[0]
    if var not in net.variables:
        raise UsageError(f"unknown variable {var!r}")
    cfg = _config(args, Mode.GRID)
    fg, store = _bp(net, cfg)
    lo, hi, n = variable_grid(fg, store, var)
    x = np.linspace(lo, hi, n)
    before = store[var, fg.below(var), Direction.TO_VARIABLE].logpdf(x)
    after = compute_posterior(fg, store, var)
    density = np.exp(after.logvals)
    density = density / trapezoid(density, x)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "log_message_before", "log_message_after", "posterior_density"])
    for row in zip(x, before - before.max(), after.logvals, density):
        w.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def _cmd_report(args, net):
    if args.emit_figure == "gauss-shift":
        _emit(_gauss_shift_csv(args, net), args.output)
        return EXIT_OK
    _emit(_report(args, net).to_json(), args.output)
    return EXIT_OK


def _dump_payload(fg, store):
    return {"factor_graph": fg.to_dict(), "store": store.to_dict(fg)}


def _cmd_dump(args, net):
    cfg = _config(args, Mode(args.mode))
    fg, store = _bp(net, cfg, args.experimental_prior_on)
    _emit(json.dumps(_dump_payload(fg, store), indent=2) + "\n", args.output)
    return EXIT_OK


_COMMANDS = {"eval": _cmd_eval, "grad": _cmd_grad, "check": _cmd_check,
             "report": _cmd_report, "dump": _cmd_dump}


def run_cli(argv=None) -> int:
    """Run one command; returns the exit status instead of exiting."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command != "eval":
            _config(args)  # reject out-of-range numeric flags up front
        net = _network(args)
        return _COMMANDS[args.command](args, net)
    except (UsageError, NetworkError, ValueError) as exc:
        print(f"liftprop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, BPError, GridUnderflowError, ArithmeticError) as exc:
        print(f"liftprop: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
