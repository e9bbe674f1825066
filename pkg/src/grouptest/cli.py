"""Command-line front end: ``grouptest {design,decode,analyze,simulate,experiment,verify}``.

Every subcommand accepts ``--config FILE`` (JSON whose keys mirror the long
flag names); flags given on the command line win. ``GT_SEED`` sets the
default seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analytics import (A_bar_restricted, AnalyticContext, U_of_p, bound_B, c_of_p,
                        lower_bound_T, normalizer, pp_expected_u0, pp_optimize, r_p_eval)
from .core import (DesignError, degree_profile, girth_at_least_6, load_design, save_design)
from .decode import decode_two_stage, parse_assignment
from .designs import (ConstructionError, DesignParams, Family, gen_poisson_poisson,
                      gen_regular_poisson, gen_regular_regular_girth6, girth_condition,
                      optimal_params)
from .experiment import ExperimentSpec, render_csv, render_json, run_experiment
from .simulate import (MAX_EXHAUSTIVE_N, exhaustive_expected_tests, mc_expected_tests,
                       mc_family_expected_tests)

log = logging.getLogger("grouptest")

QUANTITIES = ("B", "U", "c", "lower-bound", "Rp", "pp-u0", "pp-opt", "params", "A-bar")


class UsageError(Exception):
    pass


def default_seed():
    raw = os.environ.get("GT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"GT_SEED must be an integer, got {raw!r}") from None


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _emit(obj, out=None, fmt=None):
    """Write a dict (or list of flat dicts) as JSON or CSV to ``out`` or stdout."""
    if fmt is None:
        fmt = "csv" if out and str(out).endswith(".csv") else "json"
    if fmt == "csv":
        rows = obj if isinstance(obj, list) else [obj]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, Family):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _flat(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flat(v, f"{prefix}{k}."))
        else:
            out[prefix + k] = v
    return out


# -- design ------------------------------------------------------------------------

def _design_params(args):
    family = Family.parse(args.family)
    if args.l is not None or args.m is not None:
        _require(args, "l", "m")
        l = args.l if family is Family.POISSON_POISSON else int(args.l)
        if l != args.l:
            raise UsageError("regular families need an integer --l")
        return family, l, int(args.m)
    _require(args, "p")
    params = optimal_params(args.n, args.p, family, args.seed)
    return family, params.tests_per_variable, params.n_tests


def design_meta(design, family, l, m, seed):
    var_deg, test_deg = degree_profile(design)
    meta = {
        "family": family.value, "N": design.n_variables, "M": design.n_tests, "L": l,
        "seed": seed, "edges": design.n_edges,
        "variable_degree": {"min": int(var_deg.min()), "max": int(var_deg.max()),
                            "mean": float(var_deg.mean())},
        "test_degree": {"min": int(test_deg.min()), "max": int(test_deg.max()),
                        "mean": float(test_deg.mean())},
        "girth_at_least_6": bool(girth_at_least_6(design)),
    }
    if family is Family.REGULAR_REGULAR_GIRTH6:
        feas = girth_condition(design.n_variables, l, m)
        meta["feasibility"] = {"required_M": feas.required, "satisfied": feas.satisfied}
    return meta


def cmd_design(args):
    _require(args, "family", "n", "out")
    family, l, m = _design_params(args)
    if family is Family.REGULAR_REGULAR_GIRTH6:
        design = gen_regular_regular_girth6(args.n, l, m, args.seed, args.max_restarts)
    elif family is Family.REGULAR_POISSON:
        design = gen_regular_poisson(args.n, m, l, args.seed)
    else:
        design = gen_poisson_poisson(args.n, m, l, args.seed)
    save_design(design, args.out)
    meta = design_meta(design, family, l, m, args.seed)
    Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    _emit(meta)
    return 0


# -- decode ------------------------------------------------------------------------

def cmd_decode(args):
    _require(args, "design")
    if (args.x is None) == (args.x_file is None):
        raise UsageError("decode: give exactly one of --x or --x-file")
    design = load_design(args.design)
    text = args.x if args.x is not None else Path(args.x_file).read_text()
    x = parse_assignment(text, design.n_variables)
    _emit(decode_two_stage(design, x).as_dict(), args.out)
    return 0


# -- analyze -----------------------------------------------------------------------

def _analyze(args):
    q = args.quantity
    _require(args, "p")
    ctx = AnalyticContext(args.p)
    if q == "B":
        _require(args, "design")
        return {"B": bound_B(load_design(args.design), ctx)}
    if q == "U":
        u, r = U_of_p(ctx)
        return {"U": u, "argmin_r": r}
    if q == "c":
        return {"c": c_of_p(ctx)}
    if q == "A-bar":
        _require(args, "n")
        value, m = A_bar_restricted(ctx, args.n, args.n)
        return {"A_bar": value, "argmin": {str(k): v for k, v in m.items()}}
    if q == "lower-bound":
        _require(args, "n")
        lb_c, floor = lower_bound_T(args.n, ctx)
        return {"lower_bound": max(lb_c, floor), "c_bound": lb_c, "entropy_floor": floor,
                "ratio": max(lb_c, floor) / normalizer(args.n, ctx)}
    if q == "Rp":
        if args.k is None or args.l is None:
            _require(args, "n")
            params = optimal_params(args.n, args.p, Family.REGULAR_REGULAR_GIRTH6)
            k, l = float(params.mean_test_degree), params.tests_per_variable
        else:
            k, l = args.k, args.l
        return {"Rp": r_p_eval(ctx, k, l), "K": k, "L": l}
    if q == "pp-u0":
        _require(args, "n", "m", "k")
        return {"pp_u0": pp_expected_u0(args.n, ctx, args.m, args.k)}
    if q == "pp-opt":
        _require(args, "n")
        m, k, ratio = pp_optimize(args.n, ctx)
        return {"M": m, "K": k, "ratio": ratio, "M_over_scale": m / normalizer(args.n, ctx),
                "K_times_p": k * args.p}
    if q == "params":
        _require(args, "n")
        params = optimal_params(args.n, args.p, args.family or "rr6")
        out = {"family": params.family.value, "L": params.tests_per_variable,
               "M": params.n_tests, "K": float(params.mean_test_degree)}
        if params.family is not Family.POISSON_POISSON:
            feas = girth_condition(args.n, params.tests_per_variable, params.n_tests)
            out["girth_condition"] = {"required_M": feas.required, "satisfied": feas.satisfied}
        return out
    raise UsageError(f"unknown quantity {q!r}")


def cmd_analyze(args):
    _require(args, "quantity")
    result = _analyze(args)
    echo = {k: getattr(args, k) for k in ("quantity", "p", "n", "m", "k", "l", "design", "family")
            if getattr(args, k, None) is not None}
    record = {"inputs": echo, **result}
    if args.format == "csv" or (args.out and str(args.out).endswith(".csv")):
        _emit(_flat(record), args.out, "csv")
    else:
        _emit(record, args.out, "json")
    return 0


# -- simulate ------------------------------------------------------------------------

def cmd_simulate(args):
    _require(args, "p")
    ctx = AnalyticContext(args.p)
    if args.design is not None:
        design = load_design(args.design)
        n, m = design.n_variables, design.n_tests
        var_deg, _ = degree_profile(design)
        l = float(var_deg.mean())
        family = design.family
        if args.exact:
            est = exhaustive_expected_tests(design, ctx)
        else:
            est = mc_expected_tests(design, ctx, args.trials, args.seed)
    else:
        _require(args, "family", "n")
        family_enum, l, m = _design_params(args)
        n, family = args.n, family_enum.value
        params = DesignParams(family_enum, n, args.p, l, m, args.seed)
        if family_enum is Family.REGULAR_REGULAR_GIRTH6:
            design = gen_regular_regular_girth6(n, l, m, args.seed, args.max_restarts)
            if args.exact:
                est = exhaustive_expected_tests(design, ctx)
            else:
                est = mc_expected_tests(design, ctx, args.trials, args.seed)
        else:
            est = mc_family_expected_tests(params, ctx, args.design_samples, args.trials, args.seed)
    row = {"N": n, "p": args.p, "M": m, "L": l, "family": family, "seed": args.seed,
           "mean_T": est.mean, "se": est.std_error, "mean_U0": est.mean_u0,
           "mean_U1": est.mean_u1, "ratio": est.mean / normalizer(n, ctx),
           "trials": est.n_trials, "designs": est.n_designs, "exact": est.exact}
    _emit(row, args.out)
    return 0


# -- experiment ----------------------------------------------------------------------

def experiment_spec_from_args(args):
    fields = {}
    if args.spec:
        fields.update(json.loads(Path(args.spec).read_text()))
    mapping = {"mode": args.mode, "beta": args.beta, "p": args.p, "n_grid": args.n_grid,
               "families": args.families, "trials": args.trials,
               "design_samples": args.design_samples, "max_trials": args.max_trials,
               "mc_max_n": args.mc_max_n, "workers": args.workers}
    fields.update({k: v for k, v in mapping.items() if v is not None})
    if args.no_pp_analytic:
        fields["pp_analytic"] = False
    fields["seed"] = args.seed if args.seed is not None else fields.get("seed", default_seed())
    return ExperimentSpec.from_dict(fields)


def cmd_experiment(args):
    spec = experiment_spec_from_args(args)
    rows = run_experiment(spec)
    text = render_csv(spec, rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.json:
        Path(args.json).write_text(render_json(spec, rows) + "\n")
    return 0


# -- verify ---------------------------------------------------------------------------

def cmd_verify(args):
    from .acceptance import format_result, run_battery

    only = None
    if args.only:
        only = sorted({int(tok) for tok in args.only.split(",") if tok.strip()})
    results = run_battery(only=only, seed=args.seed, report=lambda r: print(format_result(r),
                                                                             flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.out:
        _emit([r.as_dict() for r in results], args.out)
    return 0 if passed == len(results) else 1


# -- parser -----------------------------------------------------------------------------

def _positive_int(text):
    v = int(text, 0)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _prob(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"expected a probability in (0, 1), got {text}")
    return v


def _int_list(text):
    return [int(tok, 0) for tok in text.replace(" ", "").split(",") if tok]


def _str_list(text):
    return [tok for tok in text.replace(" ", "").split(",") if tok]


def build_parser():
    parser = argparse.ArgumentParser(prog="grouptest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON file of defaults for this subcommand")
        sp.set_defaults(func=func)
        subs[name] = sp
        return sp

    sp = add("design", cmd_design, "generate a pool design")
    sp.add_argument("--family", choices=[f.value for f in Family])
    sp.add_argument("--n", type=_positive_int)
    sp.add_argument("--p", type=_prob)
    sp.add_argument("--l", type=float, help="tests per variable (mean for pp)")
    sp.add_argument("--m", type=_positive_int)
    sp.add_argument("--seed", type=lambda s: int(s, 0))
    sp.add_argument("--max-restarts", type=_positive_int, default=10)
    sp.add_argument("--out")

    sp = add("decode", cmd_decode, "run the two-stage decoder on one assignment")
    sp.add_argument("--design")
    sp.add_argument("--x", help="binary string (char k is x_k) or 0x hex (bit k is x_k)")
    sp.add_argument("--x-file")
    sp.add_argument("--out")

    sp = add("analyze", cmd_analyze, "evaluate an analytic quantity")
    sp.add_argument("--quantity", choices=QUANTITIES)
    sp.add_argument("--p", type=_prob)
    sp.add_argument("--n", type=_positive_int)
    sp.add_argument("--m", type=_positive_int)
    sp.add_argument("--k", type=float)
    sp.add_argument("--l", type=int)
    sp.add_argument("--family", choices=[f.value for f in Family])
    sp.add_argument("--design")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--out")

    sp = add("simulate", cmd_simulate, "estimate the expected number of tests")
    sp.add_argument("--design")
    sp.add_argument("--family", choices=[f.value for f in Family])
    sp.add_argument("--n", type=_positive_int)
    sp.add_argument("--p", type=_prob)
    sp.add_argument("--l", type=float)
    sp.add_argument("--m", type=_positive_int)
    sp.add_argument("--trials", type=_positive_int, default=1000)
    sp.add_argument("--design-samples", type=_positive_int, default=1)
    sp.add_argument("--exact", action="store_true",
                    help=f"enumerate all assignments (N <= {MAX_EXHAUSTIVE_N})")
    sp.add_argument("--max-restarts", type=_positive_int, default=10)
    sp.add_argument("--seed", type=lambda s: int(s, 0))
    sp.add_argument("--out")

    sp = add("experiment", cmd_experiment, "run an N sweep and emit CSV")
    sp.add_argument("--spec", help="JSON experiment spec; flags override its fields")
    sp.add_argument("--mode", choices=("beta_sweep", "fixed_p_sweep"))
    sp.add_argument("--beta", type=float)
    sp.add_argument("--p", type=_prob)
    sp.add_argument("--n-grid", type=_int_list)
    sp.add_argument("--families", type=_str_list)
    sp.add_argument("--trials", type=_positive_int)
    sp.add_argument("--design-samples", type=_positive_int)
    sp.add_argument("--max-trials", type=_positive_int)
    sp.add_argument("--mc-max-n", type=int)
    sp.add_argument("--no-pp-analytic", action="store_true")
    sp.add_argument("--workers", type=_positive_int)
    sp.add_argument("--seed", type=lambda s: int(s, 0))
    sp.add_argument("--out")
    sp.add_argument("--json")

    sp = add("verify", cmd_verify, "run the acceptance battery")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    sp.add_argument("--seed", type=lambda s: int(s, 0))
    sp.add_argument("--out")
    return parser, subs


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = json.loads(Path(args.config).read_text())
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = {k.replace("-", "_") for k in config} - known
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        # re-parse with the file as defaults so explicit flags still win
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})
        args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None and args.command != "experiment":
        args.seed = default_seed()
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        _error("usage", exc)
        return 2
    except (DesignError, ConstructionError, ValueError, OSError, json.JSONDecodeError) as exc:
        _error(type(exc).__name__, exc)
        return 1


def _error(kind, exc):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
