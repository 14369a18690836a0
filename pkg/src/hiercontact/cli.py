"""Command-line front end.

Every subcommand prints JSON lines (to stdout or ``--out``); the last line
is always a summary carrying ``"summary": true``.  Exit status: 0 when all
checks pass, 1 when a scientific check fails, 2 on usage or configuration
errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds, coupling, exactgen, simulate
from .lattice import Explicit, RateModel, finite_or_str, parse_alpha

SCHEMA_VERSION = "1"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return finite_or_str(float(obj))
    return obj


class _Writer:
    def __init__(self, path):
        self.fh = open(path, "w") if path else sys.stdout
        self.owned = bool(path)

    def line(self, rec: dict):
        rec = dict(rec)
        rec.setdefault("schema_version", SCHEMA_VERSION)
        self.fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")

    def close(self):
        if self.owned:
            self.fh.close()
        else:
            self.fh.flush()


def _alpha(args):
    spec = args.family or args.alpha
    if spec is None:
        raise UsageError("an infection-rate family is required (--family or --alpha)")
    try:
        return parse_alpha(spec, args.N)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _positive(name, value, allow_zero=False):
    if value is None:
        return
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"--{name} must be {'>= 0' if allow_zero else '> 0'}, got {value}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args, out: _Writer) -> int:
    if args.replicas < 1:
        raise UsageError("--replicas must be >= 1")
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    _positive("delta", args.delta)
    _positive("t", args.t, allow_zero=True)
    alpha = _alpha(args)
    model = RateModel(args.N, args.delta, alpha)
    init = simulate.origin_config(args.n, args.N)
    survivors = 0
    for r in range(args.replicas):
        res = simulate.run_trajectory(model, args.n, init, args.t, args.seed, r,
                                      record=bool(args.trajectory_csv) and r == 0)
        survivors += res.survived_to_t
        if r == 0 and args.trajectory_csv:
            simulate.write_trajectory_csv(args.trajectory_csv, res.events)
        if not args.summary_only:
            rec = res.to_json()
            rec.pop("wall_time")
            rec.pop("final_sites")
            out.line(rec)
    p = survivors / args.replicas
    se = math.sqrt(p * (1 - p) / args.replicas)
    summary = {"summary": True, "command": "simulate", "model": model.to_json(), "n": args.n,
               "t": args.t, "replicas": args.replicas, "seed": args.seed, "p_hat": p, "stderr": se}
    code = EXIT_OK
    if args.N == 2:
        bound = bounds.finite_survival_bound(args.delta, alpha, args.n, args.t)
        ok = p >= bound - 3 * se
        summary.update(finite_survival_bound=bound, bound_check=ok)
        code = EXIT_OK if ok else EXIT_FAIL
    out.line(summary)
    return code


def _verify_grid(args):
    rng = np.random.default_rng(args.seed)
    grid = []
    for n in (1, 2, 3):
        for _ in range(args.grid):
            grid.append((n, float(rng.uniform(0.05, 5)), rng.uniform(0.01, 10, n).tolist()))
    return grid


def cmd_verify(args, out: _Writer) -> int:
    checks = []
    which = args.check
    if args.xi is not None and not 0 < args.xi <= 0.5:
        raise UsageError("--xi must lie in (0, 1/2]")
    if args.xi_override is not None and not 0 < args.xi_override <= 0.5:
        raise UsageError("--xi-override must lie in (0, 1/2]")
    explicit = args.delta is not None or args.alpha_values is not None
    if explicit:
        if args.delta is None or args.alpha_values is None:
            raise UsageError("--delta and --alpha-values go together")
        _positive("delta", args.delta)
        alpha = [float(a) for a in args.alpha_values.split(",")]
        ns = [args.n] if args.n else [len(alpha)]
        grid = [(n, args.delta, alpha[:n]) for n in ns]
        if any(len(a) < n for n, _, a in grid):
            raise UsageError("--alpha-values needs at least n entries")
    else:
        grid = _verify_grid(args)
        if args.n:
            grid = [g for g in grid if g[0] == args.n]

    if which in ("all", "intertwine", "star"):
        for n, d, a in grid:
            if n > 3:
                raise UsageError("intertwining is checked for n <= 3")
            rep = exactgen.verify_intertwine(n, d, a, xi=args.xi_override)
            if which in ("all", "star"):
                alt = exactgen.verify_intertwine(n, d, a, xi=args.xi_override, star=exactgen.STAR_B)
                diff = abs(rep["max_residual"] - alt["max_residual"])
                if which == "star":
                    rep = {"check": "star", "n": n, "params": rep["params"], "max_residual": diff,
                           "threshold": 1e-12, "pass": diff < 1e-12 and rep["pass"] and alt["pass"]}
                else:
                    rep["star_B_residual"] = alt["max_residual"]
                    rep["pass"] = rep["pass"] and alt["pass"]
            checks.append(rep)
    if which in ("all", "commute"):
        for n, d, a in grid:
            if n <= 2:
                checks.append(exactgen.verify_commute(n, d, a, xi=args.xi_override))
    if which in ("all", "spectrum"):
        pairs = [(d, a[0]) for _, d, a in grid] if explicit else \
            [(d, a) for d in np.geomspace(0.05, 5, 10) for a in np.geomspace(0.01, 10, 10)]
        worst = 0.0
        for d, a1 in pairs:
            sp = exactgen.one_level_spectrum(float(d), float(a1))
            worst = max(worst, abs(sp["lambda_lead"] - sp["lambda_numeric"][0]),
                        max(abs(u - v) for u, v in zip(sp["eigvec"], sp["eigvec_expected"])),
                        sp["full_residual"])
        checks.append({"check": "spectrum", "n": 1, "params": {"pairs": len(pairs)},
                       "max_residual": worst, "threshold": 1e-12, "pass": worst < 1e-12})
    if which in ("all", "two-level"):
        xis = [args.xi] if args.xi is not None else [0.05, 0.25, 0.5]
        for xi in xis:
            for star in (exactgen.STAR_A, exactgen.STAR_B):
                checks.append(exactgen.verify_two_level_tables(xi, star))
    for rep in checks:
        if which == "two-level" or rep["check"] == "two-level":
            rep = {k: v for k, v in rep.items() if k != "tables"}
        out.line(rep)
    failed = [c for c in checks if not c["pass"]]
    for c in failed:
        print(f"check failed: {c['check']} n={c.get('n')} residual={c['max_residual']:.3e} "
              f"threshold={c['threshold']:.0e}", file=sys.stderr)
    out.line({"summary": True, "command": "verify", "checks": len(checks), "failed": len(failed),
              "failed_checks": sorted({c["check"] for c in failed}), "pass": not failed})
    return EXIT_FAIL if failed else EXIT_OK


def cmd_couple(args, out: _Writer) -> int:
    _positive("delta", args.delta)
    _positive("t", args.t, allow_zero=True)
    if args.replicas < 1:
        raise UsageError("--replicas must be >= 1")
    if args.N != 2:
        raise UsageError("the coupling is defined for --N 2")
    alpha = _alpha(args)
    model = RateModel(2, args.delta, alpha)
    if args.test == "conditional":
        if args.n not in (2, 3):
            raise UsageError("conditional-law test needs --n 2 or 3")
        rep = coupling.conditional_law_test(model, args.n, args.t, args.replicas, args.seed, args.workers)
    elif args.test == "marginal":
        rep = coupling.marginal_test(model, args.n, args.t, args.replicas, args.seed, args.workers)
    elif args.test == "cascade-init":
        rep = coupling.cascade_init_stats(model, args.n, args.replicas, args.seed)
    else:
        rep = coupling.cascade_survival_stats(model, args.n, args.t, args.replicas, args.seed, args.workers)
    out.line(rep)
    out.line({"summary": True, "command": "couple", "test": rep["test"], "pass": rep["pass"]})
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_bounds(args, out: _Writer) -> int:
    _positive("delta", args.delta)
    alpha = _alpha(args)
    N = args.N
    work_alpha = alpha
    if N != 2:
        red = bounds.compare_reduce(alpha, N, args.Nprime)
        work_alpha = red.alpha_dprime
        out.line({"record": "reduction", **red.to_json()})
    sp = bounds.survival_product(args.delta, work_alpha, max_levels=args.max_levels)
    trace = bounds.recursion(args.delta, work_alpha, min(args.levels, max(sp.levels, 1)), check_routes=False)
    out.line({"record": "trace", **trace.to_json()})
    cert = bounds.certify_extinction(args.delta, alpha, N, args.max_depth)
    summary = {"summary": True, "command": "bounds", "family": alpha.label(), "N": N,
               "delta": args.delta, **{k: v for k, v in sp.to_json().items() if k != "delta"},
               "extinction_certificate": None if cert is None else cert.to_json(),
               "smallness_constants": {k: v for k, v in bounds.smallness_constants().items() if k != "grid"}}
    if args.n is not None and args.t is not None and N == 2:
        summary["finite_survival_bound"] = bounds.finite_survival_bound(args.delta, alpha, args.n, args.t)
    code = EXIT_OK
    if cert is not None and not cert.is_valid():
        code = EXIT_FAIL
    if sp.verdict == "positive" and cert is not None:
        summary["consistency"] = "survival and extinction both certified"
        code = EXIT_FAIL
    out.line(summary)
    return code


def cmd_bracket(args, out: _Writer) -> int:
    specs = args.family or ([args.alpha] if args.alpha else None)
    if not specs:
        raise UsageError("at least one --family is required")
    mc = None
    if args.mc:
        mc = {"n": args.mc_n, "t": args.mc_t, "replicas": args.mc_replicas, "seed": args.seed}
    code = EXIT_OK
    rows = []
    for spec in specs:
        try:
            alpha = parse_alpha(spec, args.N)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        br = bounds.bracket_delta_c(alpha, args.N, args.Nprime, max_depth=args.max_depth,
                                    max_levels=args.max_levels, mc=mc)
        ordered = br["lower"] <= br["upper"]
        br["ordered"] = ordered
        code = code if ordered else EXIT_FAIL
        rows.append(br)
        out.line({"record": "bracket", **br})
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("family,lower,upper,mc_estimate,max_depth,max_levels\n")
            for br in rows:
                mc_val = br["mc_estimate"]["value"] if br["mc_estimate"] else ""
                fh.write(f"{br['family']},{br['lower']!r},{br['upper']!r},{mc_val},"
                         f"{br['max_depth']},{br['max_levels']}\n")
    for br in rows:
        print(f"{br['family']:>24s}  lower={br['lower']:.6g}  upper={br['upper']:.6g}", file=sys.stderr)
    out.line({"summary": True, "command": "bracket", "N": args.N,
              "table": [{"family": b["family"], "lower": b["lower"], "upper": b["upper"],
                         "mc_estimate": b["mc_estimate"]} for b in rows],
              "pass": code == EXIT_OK})
    return code


def cmd_compare(args, out: _Writer) -> int:
    spec = args.family or args.alpha or "geometric:0.5"
    try:
        alpha = parse_alpha(spec, args.N)
        red = bounds.compare_reduce(alpha, args.N, args.Nprime)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dom = red.check_domination(args.blocks)
    out.line({"record": "reduction", **red.to_json(), "domination": dom,
              "hypothesis": red.hypothesis,
              "alpha_dprime_values": red.alpha_dprime.values(red.n * args.blocks)})
    ok = dom["domination"] and dom["block_min_equalities"]
    out.line({"summary": True, "command": "compare", "N": args.N, "N_prime": red.N_prime,
              "m": red.m, "n": red.n, "pass": ok})
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p, family=True):
    p.add_argument("--N", type=int, default=2, help="lattice freedom (default 2)")
    if family:
        p.add_argument("--alpha", "--family", dest="family_or_alpha", default=None,
                       help="rate family: geometric:q, double_exp:theta, effective_dim:d, "
                            "explicit:a1,a2,... or a JSON object")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write JSON lines here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hiercontact",
                                 description="Contact process on the hierarchical group: "
                                             "simulation, exact checks and survival bounds.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo survival from a single infected site")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--trajectory-csv", default=None, help="dump the events of replica 0 as CSV")
    p.add_argument("--summary-only", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="exact generator identities")
    _common(p, family=False)
    p.add_argument("--check", choices=["all", "intertwine", "commute", "spectrum", "two-level", "star"],
                   default="all")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--alpha-values", default=None, help="comma-separated alpha_1..alpha_n")
    p.add_argument("--xi", type=float, default=None, help="xi for the two-level tables")
    p.add_argument("--xi-override", type=float, default=None,
                   help="use this xi instead of f(alpha_1/delta) in the kernel")
    p.add_argument("--grid", type=int, default=20, help="random parameter sets per level")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("couple", help="statistical checks of the coupled processes")
    _common(p)
    p.add_argument("--test", choices=["conditional", "marginal", "cascade-init", "cascade"],
                   default="conditional")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("bounds", help="survival product and extinction certificate at one delta")
    _common(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--Nprime", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="finite level for the finite-time bound")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--levels", type=int, default=30, help="levels of the trace to report")
    p.add_argument("--max-levels", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=40)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("bracket", help="bracket the critical recovery rate")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--family", "--alpha", dest="family_list", action="append", default=None,
                   help="repeatable")
    p.add_argument("--Nprime", type=float, default=None)
    p.add_argument("--max-depth", type=int, default=40)
    p.add_argument("--max-levels", type=int, default=200)
    p.add_argument("--mc", action="store_true", help="add a non-rigorous Monte Carlo estimate")
    p.add_argument("--mc-n", type=int, default=3)
    p.add_argument("--mc-t", type=float, default=5.0)
    p.add_argument("--mc-replicas", type=int, default=2000)
    p.add_argument("--csv", default=None, help="also write the bracket table as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("compare", help="reduce general N to N = 2")
    _common(p)
    p.add_argument("--Nprime", type=float, default=None)
    p.add_argument("--blocks", type=int, default=8, help="blocks checked for rate domination")
    p.set_defaults(func=cmd_compare)
    return ap


def _normalise(args):
    # expose the rate family under both names used by the subcommands
    if hasattr(args, "family_list"):
        args.family, args.alpha = args.family_list, None
    else:
        spec = getattr(args, "family_or_alpha", None)
        args.family, args.alpha = spec, None
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    args = _normalise(args)
    try:
        out = _Writer(args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        out.close()


if __name__ == "__main__":
    sys.exit(main())
