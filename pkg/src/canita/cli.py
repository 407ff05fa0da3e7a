"""Command-line benchmark runner.

    canita-bench run --synthetic d=50,rows=200 --algo canita --compressor randk:d/4 --T 500 --seed 1
    canita-bench sweep --synthetic d=100,rows=1000 --algos canita,diana,qsgd --compressors randk:d/4,natural
    canita-bench validate-schedule --omega 10 --n 1000 --L 1 --T 10000
    canita-bench compressor-test --draws 100000
    canita-bench summarize out/*.csv --thresholds 0.1,0.05

Output files go to ``--out`` or, if absent, ``$CANITA_OUTPUT_DIR`` or the
current directory. Exit codes: 0 success, 1 runtime failure, 2 bad usage.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from . import bench
from . import schedule as sched
from . import traces as tio
from .compressors import RngStream, check_laws, parse_compressor, randk_exact_moments
from .errors import ConfigurationError, DimensionError, ParseError, UsageError

log = logging.getLogger("canita")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_run_options(p):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="key = value config file; flags override it")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--synthetic", metavar="DESC", help="synthetic descriptor, e.g. d=100,rows=1000,noise=0.1")
    src.add_argument("--libsvm", metavar="PATH", help="LIBSVM text file")
    g.add_argument("--n", type=int, help="number of machines")
    g.add_argument("--T", type=int, help="number of rounds")
    g.add_argument("--seed", action="append", help="seed (repeatable, or comma separated)")
    g.add_argument("--stepsize", type=float, help="baseline stepsize override")
    g.add_argument("--alpha", type=float, help="diana shift stepsize override")
    g.add_argument("--log-interval", type=int)
    g.add_argument("--h0", choices=("zero", "grad"), help="initial shifts")
    g.add_argument("--charge-one", action="store_true", help="charge canita one message per round")
    g.add_argument("--normalize", action="store_true", help="scale rows to unit norm")
    g.add_argument("--partition", choices=("roundrobin", "contiguous", "shuffled"))
    g.add_argument("--ref-steps", type=int, help="gradient steps for the reference optimum")
    g.add_argument("--thresholds", help="comma separated loss thresholds for summaries")
    g.add_argument("--out", help="output directory (run also accepts a .csv/.jsonl file)")
    g.add_argument("--format", choices=("csv", "jsonl"))


def build_parser():
    parser = _Parser(prog="canita-bench", description="Compressed distributed optimization benchmark.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one configuration and write one trace per seed")
    _add_run_options(p)
    p.add_argument("--algo", choices=("canita", "diana", "qsgd"))
    p.add_argument("--compressor", help="randk:d/4, randk:<k>, natural, quant:sqrt, quant:<s>, identity")

    p = sub.add_parser("sweep", help="cross algorithms x compressors x seeds")
    _add_run_options(p)
    p.add_argument("--algos", type=_csv_list, default=["canita", "diana", "qsgd"])
    p.add_argument("--compressors", type=_csv_list, default=["randk:d/4", "natural", "quant:sqrt"])
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("validate-schedule", help="check the parameter schedule against the convergence conditions")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--T", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--json", action="store_true", help="print the full report as JSON")

    p = sub.add_parser("compressor-test", help="Monte-Carlo unbiasedness and variance checks")
    p.add_argument("--compressor", action="append",
                   help="shorthand with its dimension as SPEC@d (repeatable); default is the standard suite")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--vectors", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("summarize", help="bits-to-threshold table from trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--thresholds", help="comma separated loss thresholds (default: quantiles of qsgd losses)")
    p.add_argument("--out", help="write CSV here instead of stdout")
    return parser


def _config_from_args(args):
    overrides = {}
    if args.synthetic is not None:
        overrides["dataset"] = "synthetic:" + args.synthetic
    if args.libsvm is not None:
        overrides["dataset"] = "libsvm:" + args.libsvm
    if args.seed:
        overrides["seeds"] = ",".join(args.seed)
    if args.charge_one:
        overrides["charge_both"] = "false"
    if args.normalize:
        overrides["normalize"] = "true"
    for key in ("n", "T", "stepsize", "alpha", "log_interval", "h0", "partition", "ref_steps",
                "thresholds", "format"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = str(val)
    for key in ("algo", "compressor"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return bench.load_config(args.config, overrides)


def _cmd_run(args, out):
    config = _config_from_args(args)
    target = args.out or config.output
    if target and target.endswith((".csv", ".jsonl")):
        if len(config.seeds) != 1:
            raise UsageError("a single output file needs exactly one seed; pass a directory instead")
        fmt = tio.format_of(target)
        (tr,) = bench.run_cell(config)
        tio.write_trace(tr, target, fmt)
        paths = [target]
    else:
        paths = bench.run_to_files(config, target)
    for path in paths:
        print(path, file=out)
    return 0


def _cmd_sweep(args, out):
    config = _config_from_args(args)
    paths, summary = bench.sweep(config, args.algos, args.compressors, args.out or config.output, jobs=args.jobs)
    out.write(summary.to_csv())
    return 0


def _cmd_validate(args, out):
    sp = sched.theorem2_params(args.omega, args.n, args.L)
    report = sched.validate_theorem1(sched.generate(sp, args.T), args.omega, args.n, args.L, T=args.T, tol=args.tol)
    print(report.to_json() if args.json else report.summary(), file=out)
    return 0 if report.passed else 1


DEFAULT_SUITE = ("randk:1@10", "randk:2@10", "randk:5@10", "quant:4@16", "natural@16")


def _cmd_compressor_test(args, out):
    ok = True
    rng = np.random.default_rng(args.seed)
    for item in args.compressor or DEFAULT_SUITE:
        text, _, dim = item.partition("@")
        spec = parse_compressor(text, int(dim) if dim else 16)
        worst_z, worst_ratio, passed = 0.0, 0.0, True
        for v in range(args.vectors):
            x = rng.standard_normal(spec.d)
            res = check_laws(spec, x, args.draws, RngStream(args.seed, (v, spec.d)))
            worst_z = max(worst_z, res["max_z"])
            worst_ratio = max(worst_ratio, res["rel_var"] / res["var_bound"] if res["var_bound"] > 0 else 0.0)
            passed &= res["unbiased"] and res["variance_ok"]
        if spec.kind == "randk" and spec.d <= 6:
            x = rng.standard_normal(spec.d)
            mean, var = randk_exact_moments(x, spec.k)
            passed &= np.allclose(mean, x, rtol=1e-12) and abs(var - spec.omega * x @ x) <= 1e-12 * (x @ x)
        ok &= passed
        print(f"{spec.label():<16} d={spec.d:<4} omega={spec.omega:.4g} max|z|={worst_z:.2f} "
              f"var/bound={worst_ratio:.3f} {'pass' if passed else 'FAIL'}", file=out)
    return 0 if ok else 1


def _cmd_summarize(args, out):
    traces = [tio.read_trace(p) for p in args.traces]
    thresholds = [float(s) for s in _csv_list(args.thresholds)] if args.thresholds else None
    text = bench.summarize(traces, thresholds).to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate-schedule": _cmd_validate,
            "compressor-test": _cmd_compressor_test, "summarize": _cmd_summarize}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"canita-bench: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ConfigurationError, ParseError, DimensionError) as exc:
        print(f"canita-bench: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"canita-bench: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
