"""Command-line interface: ``driftkit {bound,oracle,simulate,verify}``.

Exit codes: 0 success, 1 usage error, 2 precondition or state-space
rejection (with a witness), 3 a verification suite found a violation.

Structured output is JSON on stdout.  Each JSON document embeds a
manifest with the command, input digests, tool version, seed and
generator id.  The timestamp and worker count live only in the sidecar
``<file>.manifest.json`` written next to any output file, so stdout and
the output files are byte-identical across worker counts.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, tails, theorems
from .errors import ConvergenceError, DomainError, EstimationError, PreconditionError, StateSpaceError
from .expr import ExprSyntaxError, parse
from .montecarlo import run_trials
from .oracle import (build_leadingones_chain, build_onemax_chain, exact_expectation, exact_tail,
                     onemax_binomial_start, parse_chain, uniform_start)
from .potential import HSpec, build_potential
from .processes import ProcessSpec
from .rng import GENERATOR_ID
from .verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_REJECTED, EXIT_VIOLATION = 0, 1, 2, 3

BOUND_COMMANDS = ("additive", "general", "variable", "variable-lower", "nonmonotone", "multiplicative",
                  "multiplicative-lower", "fitness-levels", "fitness-levels-lower", "tail-general",
                  "tail-corollary", "tail-simplified", "tail-multiplicative")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# output helpers -----------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, ensure_ascii=False) + "\n"


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _command_echo(argv: list[str]) -> list[str]:
    # the worker count never changes results, so it is left out of the echo
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--workers":
            skip = True
            continue
        if tok.startswith("--workers="):
            continue
        out.append(tok)
    return out


def _manifest(argv, inputs, seed=None) -> dict:
    m = {"command": ["driftkit", *_command_echo(argv)], "version": __version__,
         "inputs": {p: _digest(p) for p in inputs}}
    if seed is not None:
        m["master_seed"] = int(seed)
        m["generator"] = GENERATOR_ID
    return m


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
    return when.isoformat(timespec="seconds")


def _write_output(path: str, text: str, manifest: dict, workers=None) -> None:
    Path(path).write_text(text, encoding="utf-8")
    side = dict(manifest, timestamp=_timestamp(), output=path, output_sha256=_digest(path))
    if workers is not None:
        side["workers"] = workers
    Path(path + ".manifest.json").write_text(_dumps(side), encoding="utf-8")


# argument helpers ---------------------------------------------------------------

def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _table(text) -> dict:
    if isinstance(text, dict):
        return {int(k): float(v) for k, v in text.items()}
    out = {}
    for item in str(text).split(","):
        k, v = item.split(":")
        out[int(k)] = float(v)
    return out


def _gamma(text) -> list[list[float]]:
    if isinstance(text, list):
        return [[float(v) for v in row] for row in text]
    return [[float(v) for v in row.split(",")] for row in str(text).split(";")]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _h_from_args(args) -> HSpec:
    given = [k for k in ("h", "h_constant", "h_multiplicative", "h_table") if getattr(args, k, None) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --h, --h-constant, --h-multiplicative, --h-table")
    xmax = math.inf if args.xmax is None else float(args.xmax)
    if args.h_constant is not None:
        return HSpec.constant(float(args.h_constant), 0.0 if args.xmin is None else float(args.xmin), xmax)
    if args.h_multiplicative is not None:
        return HSpec.multiplicative(float(args.h_multiplicative), 1.0 if args.xmin is None else float(args.xmin), xmax)
    if args.h_table is not None:
        return HSpec.from_table(_table(args.h_table), args.xmin, args.xmax)
    _need(args, "xmin")
    if args.xmax is None:
        # the domain must reach the start; n is the natural cap for bit-string distances
        fallback = args.n if args.n is not None else getattr(args, "x0", None)
        if fallback is None:
            raise UsageError("an expression h needs --xmax (or --n or --x0 to default it)")
        xmax = float(fallback)
    return HSpec.expression(str(args.h), float(args.xmin), xmax, None if args.n is None else float(args.n))


def _chain_from_args(args, inputs: list):
    if getattr(args, "chain", None) is None:
        return None
    inputs.append(args.chain)
    a = getattr(args, "a", None)
    return parse_chain(Path(args.chain).read_text(encoding="utf-8"), a=None if a is None else float(a))


def _add_h_options(p):
    p.add_argument("--h", help="drift function as an expression in x (and n)")
    p.add_argument("--h-constant", type=float, help="constant drift")
    p.add_argument("--h-multiplicative", type=float, help="drift delta*x")
    p.add_argument("--h-table", help="integer table, e.g. 1:0.5,2:0.25")
    p.add_argument("--xmin", type=float)
    p.add_argument("--xmax", type=float)
    p.add_argument("--n", type=float, help="value of n inside expressions")


def _apply_spec(args) -> list:
    """Fill unset options from a YAML spec file with keys process/drift/theorem/params."""
    if getattr(args, "spec", None) is None:
        return []
    data = yaml.safe_load(Path(args.spec).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise UsageError("spec file must be a mapping")
    unknown = set(data) - {"process", "drift", "theorem", "params"}
    if unknown:
        raise UsageError(f"unknown spec keys: {', '.join(sorted(unknown))}")
    theorem = data.get("theorem")
    if theorem is not None and getattr(args, "which_bound", None) not in (None, theorem):
        raise UsageError(f"spec names theorem {theorem!r} but the command is {args.which_bound!r}")
    for section in ("drift", "params", "process"):
        for key, value in (data.get(section) or {}).items():
            dest = str(key).replace("-", "_")
            if not hasattr(args, dest):
                raise UsageError(f"spec option {section}.{key} is not understood by this command")
            if getattr(args, dest) in (None, False):
                setattr(args, dest, value)
    return [args.spec]


# bound --------------------------------------------------------------------------

def cmd_bound(args, argv) -> int:
    inputs = _apply_spec(args)
    chain = _chain_from_args(args, inputs)
    kind = args.which_bound
    if kind == "additive":
        _need(args, "delta", "x0")
        fn = theorems.additive_upper if args.direction == "upper" else theorems.additive_lower
        res = fn(args.delta, args.x0, chain)
    elif kind == "general":
        _need(args, "alpha", "x0")
        res = theorems.general_expected_bound(build_potential(_h_from_args(args)), args.alpha, args.x0,
                                              args.direction, chain)
    elif kind == "variable":
        _need(args, "x0")
        res = theorems.variable_upper(_h_from_args(args), args.x0, chain, args.assume_monotone)
    elif kind == "variable-lower":
        _need(args, "x0", "c")
        c_expr = parse(str(args.c))
        res = theorems.variable_lower(_h_from_args(args), lambda x: c_expr(x, args.n), args.x0, chain,
                                      args.assume_monotone)
    elif kind == "nonmonotone":
        _need(args, "x0", "c")
        res = theorems.nonmonotone_variable_upper(_h_from_args(args), float(args.c), args.x0, chain)
    elif kind == "multiplicative":
        _need(args, "delta", "xmin", "x0")
        res = theorems.multiplicative_upper(args.delta, args.xmin, args.x0, chain)
    elif kind == "multiplicative-lower":
        _need(args, "delta", "beta", "xmin", "x0")
        res = theorems.multiplicative_lower(args.delta, float(args.beta), args.xmin, args.x0, chain)
    elif kind == "fitness-levels":
        _need(args, "p")
        p = _floats(args.p)
        part = theorems.FitnessPartition(len(p) + 1, p=p)
        res = theorems.fitness_levels_upper(part, args.start_level)
    elif kind == "fitness-levels-lower":
        _need(args, "u", "gamma", "start")
        u = _floats(args.u)
        m = len(u) + 1
        part = theorems.FitnessPartition(m, u=u, gamma=np.array(_gamma(args.gamma)), chi=float(args.chi or 0.0),
                                         start=_floats(args.start))
        res = theorems.fitness_levels_lower(part)
    elif kind == "tail-general":
        _need(args, "lam", "beta", "t", "x0")
        beta = args.beta if str(args.beta) == tails.ORACLE else float(args.beta)
        params = tails.TailParams(float(args.lam), beta, float(args.a or 0.0), int(args.t), bool(args.absorbing))
        traj = _floats(args.trajectory) if args.trajectory is not None else None
        g = build_potential(_h_from_args(args))
        fn = tails.general_tail_upper if args.side == "upper" else tails.general_tail_lower
        res = fn(g, params, args.x0, traj, chain)
    elif kind == "tail-corollary":
        _need(args, "lam", "t", "x0")
        res = tails.corollary_bounds(_h_from_args(args), float(args.lam), args.x0, float(args.t), args.which, chain)
    elif kind == "tail-simplified":
        _need(args, "mgf", "lam", "delta", "t", "x0")
        sp = tails.SimplifiedTailParams(float(args.mgf), float(args.lam), float(args.delta))
        side = tails.UPPER_TAIL if args.side == "upper" else tails.LOWER_TAIL
        res = tails.simplified_tail(_h_from_args(args), sp, args.x0, float(args.t), side, bool(args.absorbing))
    elif kind == "tail-multiplicative":
        _need(args, "delta", "xmin", "x0", "t")
        res = tails.multiplicative_tail(args.delta, args.xmin, args.x0, float(args.t))
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown bound {kind!r}")
    out = res.as_dict()
    if isinstance(res, tails.TailResult):
        out["vacuous"] = res.vacuous
    out["manifest"] = _manifest(argv, inputs)
    sys.stdout.write(_dumps(out))
    return EXIT_OK


# oracle ---------------------------------------------------------------------

def _start_for(process: str, start, chain, n):
    if start is None:
        if process == "onemax":
            return onemax_binomial_start(n), "binomial"
        if process == "leadingones":
            return uniform_start(chain), "uniform"
        raise UsageError("--start is required for an explicit chain")
    text = str(start)
    if text == "uniform":
        return uniform_start(chain), text
    if text == "binomial":
        if process != "onemax":
            raise UsageError("--start binomial applies to onemax only")
        return onemax_binomial_start(n), text
    try:
        return int(text), int(text)
    except ValueError:
        raise UsageError(f"--start must be a state index, 'uniform' or 'binomial', got {text!r}") from None


def _oracle_chain(args, inputs):
    if args.process == "onemax":
        _need(args, "n")
        return build_onemax_chain(int(args.n))
    if args.process == "leadingones":
        _need(args, "n")
        return build_leadingones_chain(int(args.n), None if args.a is None else int(args.a))
    _need(args, "file")
    inputs.append(args.file)
    return parse_chain(Path(args.file).read_text(encoding="utf-8"), None if args.a is None else float(args.a))


def cmd_oracle(args, argv) -> int:
    inputs = _apply_spec(args)
    chain = _oracle_chain(args, inputs)
    start, start_desc = _start_for(args.process, args.start, chain, None if args.n is None else int(args.n))
    value = exact_expectation(chain, start)
    out = {"process": args.process, "states": chain.size, "start": start_desc, "expectation": value}
    if args.n is not None:
        out["n"] = int(args.n)
    manifest = _manifest(argv, inputs)
    if args.tail is not None:
        curve = exact_tail(chain, start, int(args.tail))
        out["tail_truncated"] = curve.truncated
        rows = ["t,P(T>=t)"] + [f"{t},{float(p)!r}" for t, p in enumerate(curve.values)]
        csv = "\n".join(rows) + "\n"
        if args.csv:
            _write_output(args.csv, csv, manifest)
            out["tail_csv"] = args.csv
        else:
            out["tail"] = [[t, float(p)] for t, p in enumerate(curve.values)]
    out["manifest"] = manifest
    sys.stdout.write(_dumps(out))
    return EXIT_OK


# simulate ------------------------------------------------------------------

def _process_spec(args, inputs) -> ProcessSpec:
    proc = args.process
    if proc == "chain":
        _need(args, "file", "start")
        inputs.append(args.file)
        chain = parse_chain(Path(args.file).read_text(encoding="utf-8"), None if args.a is None else float(args.a))
        start, _ = _start_for("chain", args.start, chain, None)
        return ProcessSpec.explicit(chain, start)
    _need(args, "n")
    n = int(args.n)
    if proc == "onemax":
        return ProcessSpec.onemax(n, args.start_zeros)
    if proc == "linear":
        if args.weights is not None:
            weights = _floats(args.weights)
        elif args.weights_seed is not None:
            weights = np.random.default_rng(int(args.weights_seed)).uniform(1.0, 2.0, n).tolist()
        else:
            raise UsageError("linear functions need --weights or --weights-seed")
        return ProcessSpec.linear(n, weights, args.start_zeros)
    init = "uniform" if args.init is None else tuple(int(c) for c in str(args.init))
    return ProcessSpec.leadingones(n, None if args.a is None else int(args.a), init)


def cmd_simulate(args, argv) -> int:
    inputs = _apply_spec(args)
    spec = _process_spec(args, inputs)
    stats = run_trials(spec, a=args.threshold, trials=int(args.trials), master_seed=int(args.seed),
                       step_cap=args.cap, workers=args.workers, bucket_width=args.bucket_width)
    manifest = _manifest(argv, inputs, args.seed)
    out = {"process": spec.describe(), "threshold": args.threshold, "summary": stats.summary()}
    if args.csv:
        _write_output(args.csv, stats.to_csv(), manifest, args.workers)
        out["csv"] = args.csv
    out["manifest"] = manifest
    sys.stdout.write(_dumps(out))
    return EXIT_OK


# verify -------------------------------------------------------------------------

def cmd_verify(args, argv) -> int:
    report = run_suite(args.suite, n=args.n, a=args.a, trials=args.trials, seed=args.seed, workers=args.workers,
                       chains=args.chains, c_lower=args.c_lower)
    out = report.as_dict()
    manifest = _manifest(argv, [], args.seed)
    out["manifest"] = manifest
    text = _dumps(out)
    if args.out:
        _write_output(args.out, text, manifest, args.workers)
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_VIOLATION


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="driftkit", description="Drift-theorem bounds, exact chain oracles and simulation.")
    parser.add_argument("--version", action="version", version=f"driftkit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    bound = sub.add_parser("bound", help="evaluate an expectation or tail bound")
    bsub = bound.add_subparsers(dest="which_bound", parser_class=_Parser)
    bsub.required = True
    for name in BOUND_COMMANDS:
        p = bsub.add_parser(name)
        _add_h_options(p)
        p.add_argument("--spec", help="YAML file with keys process/drift/theorem/params")
        p.add_argument("--chain", help="explicit chain file; enables exact precondition checks")
        p.add_argument("--x0", type=float)
        p.add_argument("--a", type=float, help="target threshold")
        p.add_argument("--delta", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta")
        p.add_argument("--c")
        p.add_argument("--lam", type=float)
        p.add_argument("--t", type=float)
        p.add_argument("--mgf", type=float, help="E(exp(lam Z)) of the dominating variable")
        p.add_argument("--p")
        p.add_argument("--u")
        p.add_argument("--gamma", help="rows separated by ';', entries by ','")
        p.add_argument("--chi", type=float)
        p.add_argument("--start")
        p.add_argument("--start-level", type=int)
        p.add_argument("--trajectory")
        p.add_argument("--direction", choices=("upper", "lower"), default="upper")
        p.add_argument("--side", choices=("upper", "lower"), default="upper")
        p.add_argument("--which", choices=(tails.COROLLARY_UPPER, tails.COROLLARY_LOWER), default=tails.COROLLARY_UPPER)
        p.add_argument("--absorbing", action="store_true")
        p.add_argument("--assume-monotone", action="store_true")
        p.set_defaults(func=cmd_bound)

    oracle = sub.add_parser("oracle", help="exact expectation and survival curve of a finite chain")
    oracle.add_argument("--process", choices=("onemax", "leadingones", "chain"), required=True)
    oracle.add_argument("--n", type=int)
    oracle.add_argument("--a", type=float)
    oracle.add_argument("--file")
    oracle.add_argument("--start")
    oracle.add_argument("--tail", type=int, metavar="T_MAX")
    oracle.add_argument("--csv")
    oracle.add_argument("--spec")
    oracle.set_defaults(func=cmd_oracle)

    sim = sub.add_parser("simulate", help="seeded Monte Carlo of a benchmark process or chain")
    sim.add_argument("--process", choices=("onemax", "linear", "leadingones", "chain"), required=True)
    sim.add_argument("--n", type=int)
    sim.add_argument("--a", type=float, help="LeadingOnes target value, or chain target threshold")
    sim.add_argument("--threshold", type=float, help="stop once the distance is at most this")
    sim.add_argument("--weights")
    sim.add_argument("--weights-seed", type=int)
    sim.add_argument("--start-zeros", type=int)
    sim.add_argument("--init", help="fixed LeadingOnes start as a 0/1 string")
    sim.add_argument("--file")
    sim.add_argument("--start")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--cap", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--bucket-width", type=float)
    sim.add_argument("--csv")
    sim.add_argument("--spec")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run a named claim suite")
    ver.add_argument("--suite", choices=SUITES, required=True)
    ver.add_argument("--n", type=int)
    ver.add_argument("--a", type=int)
    ver.add_argument("--trials", type=int)
    ver.add_argument("--seed", type=int)
    ver.add_argument("--workers", type=int)
    ver.add_argument("--chains", type=int)
    ver.add_argument("--c-lower", type=float)
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "oracle" and args.process == "leadingones" and args.a is not None:
            args.a = int(args.a)
        return args.func(args, argv)
    except UsageError as exc:
        sys.stderr.write(f"driftkit: error: {exc}\n")
        return EXIT_USAGE
    except PreconditionError as exc:
        sys.stdout.write(_dumps({"error": "precondition", "message": str(exc), "witness": exc.witness}))
        sys.stderr.write(f"driftkit: precondition rejected: {exc}\n")
        return EXIT_REJECTED
    except (StateSpaceError, EstimationError) as exc:
        sys.stdout.write(_dumps({"error": type(exc).__name__, "message": str(exc)}))
        sys.stderr.write(f"driftkit: {exc}\n")
        return EXIT_REJECTED
    except ConvergenceError as exc:
        sys.stdout.write(_dumps({"error": "convergence", "message": str(exc), "estimate": exc.estimate}))
        sys.stderr.write(f"driftkit: {exc}\n")
        return EXIT_REJECTED
    except (DomainError, ExprSyntaxError, ValueError, OSError, yaml.YAMLError) as exc:
        sys.stderr.write(f"driftkit: error: {exc}\n")
        return EXIT_USAGE
