"""
Command-line front end.

Every subcommand prints one JSON document (or CSV for curves) carrying the
effective configuration and the library version. The ``config`` object of
any JSON output can be fed back with ``--config`` to rerun the same job.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, bernoulli, gap, optimize, thermo, transfer
from .bernoulli import ProbVector
from .map_core import DimgapError, check_conditions, load_map

COMMANDS = ("dim", "beta-curve", "pressure", "variance", "gibbs", "gap", "optimize", "check-map")
DEFAULT_PVEC = "[0.5, 0.5]"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialisation


def _num(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = "%.17g" % x
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def parse_t_grid(spec: str) -> np.ndarray:
    """'start:stop:step' (inclusive stop) or a comma-separated list."""
    if ":" in spec:
        try:
            a, b, h = (float(v) for v in spec.split(":"))
        except ValueError as e:
            raise UsageError(f"bad --t-grid {spec!r}") from e
        if h <= 0 or b < a:
            raise UsageError(f"bad --t-grid {spec!r}")
        n = int(round((b - a) / h))
        return np.round(a + h * np.arange(n + 1), 12)
    try:
        return np.array([float(v) for v in spec.split(",")])
    except ValueError as e:
        raise UsageError(f"bad --t-grid {spec!r}") from e


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("DIMGAP_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="JSON config file (e.g. the config echo of an earlier run)")
    g.add_argument("--map", default="gauss", help="'gauss', a JSON map document or a path (default gauss)")
    g.add_argument("--pvec", default=None, help=f"probability vector: inline JSON or path (default {DEFAULT_PVEC})")
    g.add_argument("--digit-cut", type=int, default=None, help="digit truncation (default: per command)")
    g.add_argument("--grid", type=int, default=transfer.DEFAULT_GRID, help="transfer-operator grid size M")
    g.add_argument("--depth", type=int, default=None, help="quadrature depth (default: adaptive)")
    g.add_argument("--tol", type=float, default=None, help="tolerance (default: per command)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--output", default=None, help="write here instead of stdout")
    g.add_argument("--no-meta", action="store_true", help="omit timestamp and timing for byte-identical output")
    g.add_argument("--threads", type=int, default=None, help="worker pool size (fallback: DIMGAP_THREADS, then 1)")

    ap = argparse.ArgumentParser(prog="dimgap", description="Dimension gaps for Bernoulli measures of the Gauss map.")
    ap.add_argument("--version", action="version", version=f"dimgap {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    sub.add_parser("dim", parents=[common], help="entropy, Lyapunov exponent and dimension of mu_p")

    p = sub.add_parser("beta-curve", parents=[common], help="beta, beta', beta'' on a t grid")
    p.add_argument("--t-grid", default="0:1:0.05", help="start:stop:step or comma list")

    p = sub.add_parser("pressure", parents=[common], help="pressure of -b log|T'| + t f_p")
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--method", choices=("auto", "determinant", "difference", "operator"), default="auto")
    p.add_argument("--full-alphabet", action="store_true", help="ignore --pvec and use all digits (t must be 0)")

    for name, hlp in (("variance", "asymptotic variance by two routes"), ("gibbs", "Gibbs state diagnostics")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--t", type=float, default=0.25)

    p = sub.add_parser("gap", parents=[common], help="assemble gap certificates")
    p.add_argument("--mode", choices=("paper-chain", "empirical", "both"), default="both")
    p.add_argument("--n-vectors", type=int, default=6, help="Hypothesis-1 sweep vectors")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--s0", type=float, default=0.75)
    p.add_argument("--lambda0", type=float, default=4.0)
    p.add_argument("--opt-support", default="2,4", help="optimiser support sizes added to the empirical sweep ('' for none)")

    p = sub.add_parser("optimize", parents=[common], help="maximise dim mu_p over p on digits 1..N")
    p.add_argument("--support", type=int, default=4)
    p.add_argument("--method", choices=("pg", "ca", "grid"), default="pg")
    p.add_argument("--restarts", type=int, default=optimize.N_RESTARTS)
    p.add_argument("--max-iter", type=int, default=200)

    sub.add_parser("check-map", parents=[common], help="check the structural conditions of a map")
    return ap


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "output")}
    return cfg


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    argv = list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {known.config}: {e}") from e
        cfg = cfg.get("config", cfg)
        cmd = cfg.get("command")
        if not any(a in COMMANDS for a in argv):
            if cmd is None:
                raise UsageError("config has no command")
            argv = [cmd] + argv
        cmd = next(a for a in argv if a in COMMANDS)
        sp = ap._subparsers._group_actions[0].choices[cmd]
        known_dest = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in known_dest and k != "command"})
    return ap.parse_args(argv)


# ---------------------------------------------------------------------------
# commands


def _pvec(args) -> ProbVector:
    if args.pvec is None:
        args.pvec = DEFAULT_PVEC
    return ProbVector.from_json(args.pvec)


def cmd_dim(args, tmap):
    p = _pvec(args)
    if args.tol is None:
        args.tol = bernoulli.DEFAULT_TOL
    r = bernoulli.dimension(p, args.depth, tol=args.tol, tmap=tmap, seed=args.seed)
    return {"entropy": r.entropy, "lyapunov": r.lyapunov, "dim": r.dim, "err": r.err,
            "depth": r.depth, "method": r.method}


def cmd_beta_curve(args, tmap):
    p = _pvec(args)
    if args.tol is None:
        args.tol = 1e-12
    t = parse_t_grid(args.t_grid)
    curve = thermo.beta_curve(p, t, args.tol, tmap=tmap, grid=args.grid)
    if args.format == "csv":
        return curve.to_csv()
    return {
        "samples": [{"t": s.t, "beta": s.beta, "beta_prime": s.beta_prime, "beta_second": s.beta_second,
                     "err": s.err} for s in curve.samples],
        "beta0_subsystem": curve.beta0_subsystem,
        "trapezoid_beta_prime": curve.trapezoid(),
        "convex": curve.is_convex(),
        "flags": curve.flags,
    }


def cmd_pressure(args, tmap):
    if args.full_alphabet:
        p = None
        args.pvec = None
    else:
        p = _pvec(args)
    if args.digit_cut is None:
        args.digit_cut = 200
    spec = thermo.PotentialSpec(args.b, args.t, p)
    r = thermo.pressure(spec, args.depth, method=args.method, tmap=tmap, digit_cut=args.digit_cut, grid=args.grid)
    return r.as_dict()


def _state(args, tmap):
    p = _pvec(args)
    if args.tol is None:
        args.tol = 1e-12
    b = thermo.beta(p, args.t, args.tol, tmap=tmap, grid=args.grid)
    return transfer.gibbs_state(p, args.t, b, tmap=tmap, M=args.grid)


def cmd_variance(args, tmap):
    st = _state(args, tmap)
    cob = transfer.coboundary_U(st)
    v = transfer.variance(st, cob)
    lyap = st.lyapunov()
    return {"beta": st.beta, "beta_prime": cob.beta_prime, "green_kubo": v.green_kubo,
            "single_integral": v.single_integral, "agreement": v.agreement, "n_terms": v.n_terms,
            "rho": v.rho, "beta_second": max(v.single_integral, 0.0) / lyap,
            "residual_M_ftilde": transfer.residual_M_ftilde(st, cob)}


def cmd_gibbs(args, tmap):
    st = _state(args, tmap)
    step = max(1, st.M // 16)
    x = np.linspace(0.0, 1.0, st.M + 1)[::step]
    return {"beta": st.beta, "lambda": st.lam, "iterations": st.iterations, "lyapunov": st.lyapunov(),
            "beta_prime": transfer.beta_prime_gibbs(st), "cone": st.cone,
            "h_in_cone": st.h.in_cone(st.a), "gibbs_constant": st.gibbs_constant()["c3"],
            "h_nodes": {"x": x, "h": st.h.values[::step]}}


def cmd_gap(args, tmap):
    thr = _threads(args)
    vecs = gap.sample_hypothesis1(args.n_vectors, eps=args.eps, seed=args.seed)
    sweep = gap.run_sweep(vecs, threads=thr, grid=args.grid, tmap=tmap)
    out = {}
    if args.mode in ("paper-chain", "both"):
        pc = gap.paper_chain(sweep, s0=args.s0, lam0=args.lambda0, tmap=tmap)
        out["paper_chain"] = pc.to_json()
        out["paper_chain"]["invariants"] = pc.check_invariants()
    if args.mode in ("empirical", "both"):
        extra = []
        sizes = [int(v) for v in str(args.opt_support).split(",") if v.strip()]
        if sizes:
            for run in optimize.maximize_sequence(sizes, seed=args.seed, threads=thr):
                extra.append(run.p)
        em = gap.empirical(sweep, extra, eps=args.eps, s0=args.s0, lam0=args.lambda0, grid=args.grid, tmap=tmap)
        out["empirical"] = em.to_json()
    out["prior_gap_comparison"] = f"dim <= 1 - {gap.PRIOR_GAP}"
    return out


def cmd_optimize(args, tmap):
    if args.tol is None:
        args.tol = 1e-6
    run = optimize.maximize_dim(args.support, args.method, max_iter=args.max_iter, tol=args.tol,
                                restarts=args.restarts, seed=args.seed, threads=_threads(args), tmap=tmap)
    return run.to_json()


def cmd_check_map(args, tmap):
    if args.digit_cut is None:
        args.digit_cut = 20
    return check_conditions(tmap, cut=args.digit_cut)


HANDLERS = {
    "dim": cmd_dim, "beta-curve": cmd_beta_curve, "pressure": cmd_pressure, "variance": cmd_variance,
    "gibbs": cmd_gibbs, "gap": cmd_gap, "optimize": cmd_optimize, "check-map": cmd_check_map,
}


def run(argv=None) -> int:
    """Run one subcommand; returns the exit code."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
    except UsageError as e:
        print(f"dimgap: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)
    t0 = time.time()
    try:
        tmap = load_map(args.map)
        args.threads = _threads(args)  # echo the effective count
        result = HANDLERS[args.command](args, tmap)
    except UsageError as e:
        print(f"dimgap: error: {e}", file=sys.stderr)
        return 2
    except (DimgapError, ValueError, OSError) as e:
        print(f"dimgap: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    cfg = _config(args)
    if isinstance(result, str):
        header = f"# dimgap {__version__}\n# config {json.dumps(cfg, sort_keys=True)}\n"
        text = header + result
    else:
        doc = {"command": args.command, "version": __version__, "config": cfg, "result": result}
        if not args.no_meta:
            doc["meta"] = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_s": time.time() - t0}
        text = dumps(doc) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
