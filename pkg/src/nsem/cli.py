"""Command-line experiments on geometric Brownian motion.

Subcommands
-----------
paths        one shared Brownian path through EM / NSEM / BIM and the exact solution
expectation  Monte Carlo means and standard errors against E[Y(t)]
minstep      positivity-preserving minimal steps (single point or ratio sweep)
convergence  strong error on dyadic coupled grids and the fitted order
invariance   analytic vs empirical increment-bound violation and domain exits

Every subcommand accepts ``--config FILE`` holding ``key=value`` lines (keys
are the long flag names without dashes, ``#`` starts a comment); flags given
on the command line override the file. Exit codes: 0 success, 2 usage error,
3 numeric failure. CSV numbers carry 17 significant digits.
"""

import argparse
import io
import math
import os
import sys

import numpy as np

from .analysis import (
    InvarianceBounds,
    exit_statistics,
    invariance_probability,
    mc_expectation,
    min_step_em,
    min_step_nsem,
    ratio_curve,
    strong_error_curve,
)
from .errors import ArgumentError, NsemError, NumericError, RootNotFoundError
from .model import BoxDomain, GbmModel, gbm_exact_expectation, gbm_exact_solution
from .rng import SeedSpec, generate_path
from .schemes import SchemeSpec, exp_bound, integrate, linear_bound

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SCHEMES = ("em", "nsem", "bim")


class UsageError(Exception):
    pass


def _fmt(x):
    return format(float(x), ".17g")


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    tmp = out + ".part"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _grid(spec, name):
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"--{name} expects lo:hi:n") from None
    if not (0 < lo < hi) or n < 2:
        raise UsageError(f"--{name} needs 0 < lo < hi and n >= 2")
    return np.linspace(lo, hi, n)


def _schemes(spec):
    names = [s.strip() for s in spec.split(",") if s.strip()]
    bad = [s for s in names if s not in SCHEMES]
    if bad or not names:
        raise UsageError(f"--schemes takes a comma list from {','.join(SCHEMES)}")
    return [s for s in SCHEMES if s in names]


def _scheme_spec(name, args, lam):
    if name == "em":
        return SchemeSpec.em()
    if name == "nsem":
        alpha = args.alpha if args.alpha is not None else lam
        if not alpha > 0:
            raise UsageError("NSEM needs alpha > 0 (set --alpha when mu = 0)")
        return SchemeSpec.nsem(alpha)
    c0 = args.c0 if args.c0 is not None else lam
    c1 = args.c1 if args.c1 is not None else args.sigma
    return SchemeSpec.bim_scheme(c0, c1)


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise UsageError(f"--{name} must be > 0")


def cmd_paths(args):
    _positive("T", args.T)
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    model = GbmModel(args.mu, args.sigma, args.y0, args.T)
    sde = model.to_sde()
    lam = abs(args.mu)
    path = generate_path(SeedSpec(args.seed, 0), args.T / args.steps, args.steps)
    names = _schemes(args.schemes)
    cols = [gbm_exact_solution(model, path.values[:, 0], path.times)]
    for name in names:
        cols.append(integrate(sde, _scheme_spec(name, args, lam), path).states[:, 0])
    rows = zip(path.times, *cols)
    return _csv(["t", "exact"] + names, rows)


def cmd_expectation(args):
    _positive("T", args.T)
    _positive("h", args.h)
    if args.paths < 2:
        raise UsageError("--paths must be >= 2")
    model = GbmModel(args.mu, args.sigma, args.y0, args.T)
    sde = model.to_sde()
    lam = abs(args.mu)
    names = _schemes(args.schemes)
    header = ["t", "analytic"]
    cols = []
    times = None
    for name in names:
        est = mc_expectation(sde, _scheme_spec(name, args, lam), args.h, args.paths, args.seed)
        times = [e.time for e in est]
        failures = est[-1].failures
        if failures:
            print(f"{name}: {failures} paths produced non-finite states", file=sys.stderr)
        header += [f"{name}_mean", f"{name}_se"]
        cols += [[e.mean for e in est], [e.std_error for e in est]]
    analytic = [gbm_exact_expectation(model, t) for t in times]
    return _csv(header, zip(times, analytic, *cols))


def _check_minstep_args(args):
    _positive("lambda", args.lam)
    _positive("sigma", args.sigma)
    if not (0 < args.eps < 0.5):
        raise UsageError("--eps must lie in (0, 1/2)")


def cmd_minstep(args):
    _positive("lambda", args.lam)
    if not (0 < args.eps < 0.5):
        raise UsageError("--eps must lie in (0, 1/2)")
    if args.ratio_sweep:
        rows = ratio_curve(args.lam, _grid(args.ratio_sweep, "ratio-sweep"), args.eps)
        return _csv(["ratio", "h0_em", "h0_nsem"], rows)
    _positive("sigma", args.sigma)
    em = min_step_em(args.lam, args.sigma, args.eps).h0
    ns = min_step_nsem(args.lam, args.sigma, args.eps).h0
    picked = {"em": [em], "nsem": [ns], "both": [em, ns]}[args.scheme]
    print(", ".join(_fmt(v) for v in picked))
    if args.out:
        return _csv(["lambda", "sigma", "eps", "h0_em", "h0_nsem"],
                    [(args.lam, args.sigma, args.eps, em, ns)])
    return None


def cmd_convergence(args):
    _positive("T", args.T)
    if args.levels < 2 or args.paths < 2:
        raise UsageError("--levels and --paths must be >= 2")
    model = GbmModel(args.mu, args.sigma, args.y0, args.T)
    lam = abs(args.mu)
    curve = strong_error_curve(model, _scheme_spec(args.scheme, args, lam), args.fine_steps,
                               args.levels, args.paths, args.seed)
    if curve.fitted_order is None:
        print("order=n/a (errors at machine precision: scheme exact on this problem)")
    else:
        print(f"order={curve.fitted_order:.4f} +- {curve.fit_stderr:.4f}")
    return _csv(["h", "error"], zip(curve.steps, curve.errors))


def cmd_invariance(args):
    _check_minstep_args(args)
    _positive("T", args.T)
    if args.paths < 2:
        raise UsageError("--paths must be >= 2")
    hs = _grid(args.h_grid, "h-grid")
    if hs[-1] > args.T:
        raise UsageError("--h-grid exceeds --T")
    model = GbmModel.decay(args.lam, args.sigma, args.y0, args.T)
    sde = model.to_sde()
    scheme = _scheme_spec(args.scheme, args, args.lam)
    bound = linear_bound if args.scheme == "em" else exp_bound
    bounds = InvarianceBounds.for_gbm(args.lam, args.sigma)
    rows = []
    for h in hs:
        prob = invariance_probability(bounds, bound, h)
        st = exit_statistics(sde, scheme, BoxDomain.positive_orthant(), h, args.paths, args.seed,
                             bounds=bounds, denom_bound=bound)
        rows.append((h, prob, st.overall_step_violation, st.exit_fraction))
    return _csv(["h", "analytic_prob", "empirical_step_violation", "exit_fraction"], rows)


def _common(p, seed=True):
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--out", help="output CSV path (default: standard output)")
    if seed:
        p.add_argument("--seed", type=int, default=2024)


def _gbm_flags(p, T=10.0):
    p.add_argument("--mu", type=float, default=-1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=T)
    _scheme_flags(p)


def _scheme_flags(p):
    p.add_argument("--alpha", type=float, default=None, help="NSEM rate (default |mu|)")
    p.add_argument("--c0", type=float, default=None, help="BIM weight on h (default |mu|)")
    p.add_argument("--c1", type=float, default=None, help="BIM weight on |dW| (default sigma)")


def build_parser():
    parser = argparse.ArgumentParser(prog="nsem", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("paths", help="trajectories on one shared Brownian path")
    _common(p)
    _gbm_flags(p)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--schemes", default="em,nsem,bim")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("expectation", help="Monte Carlo means against the exact expectation")
    _common(p)
    _gbm_flags(p)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--schemes", default="em,nsem,bim")
    p.set_defaults(func=cmd_expectation, sigma=1.0)

    p = sub.add_parser("minstep", help="minimal steps for positivity")
    _common(p, seed=False)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--scheme", choices=("em", "nsem", "both"), default="both")
    p.add_argument("--ratio-sweep", default=None, metavar="LO:HI:N")
    p.set_defaults(func=cmd_minstep)

    p = sub.add_parser("convergence", help="strong error and fitted order")
    _common(p)
    _gbm_flags(p, T=1.0)
    p.add_argument("--scheme", choices=SCHEMES, default="em")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--fine-steps", type=int, default=512)
    p.add_argument("--paths", type=int, default=2000)
    p.set_defaults(func=cmd_convergence, sigma=0.5)

    p = sub.add_parser("invariance", help="increment-bound violations and domain exits")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--h-grid", default="0.05:1:20", metavar="LO:HI:N")
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--scheme", choices=SCHEMES, default="nsem")
    _scheme_flags(p)
    p.set_defaults(func=cmd_invariance)
    return parser


def read_config(path, subparser):
    """Parse ``key=value`` lines into argparse defaults for ``subparser``."""
    known = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known or key in ("config", "help"):
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            action = known[key]
            try:
                conv = action.type(value) if action.type else value
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
            if action.choices and conv not in action.choices:
                raise UsageError(f"{path}:{lineno}: {key} must be one of {action.choices}")
            values[action.dest] = conv
    return values


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    try:
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**read_config(args.config, sub))
            args = parser.parse_args(argv)
        text = args.func(args)
        if text is not None:
            _emit(text, args.out)
    except (UsageError, ArgumentError, OSError) as exc:
        print(f"nsem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, RootNotFoundError) as exc:
        print(f"nsem {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NsemError as exc:
        print(f"nsem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
