"""
Command handlers: prep, train, bench, export and audit.

Every handler takes the parsed argparse namespace and returns a process exit
code: 0 success, 1 property failure or failed bench cell, 2 usage/data error.
"""
import argparse
import asyncio
import json
from pathlib import Path

import numpy as np

from config.settings import BENCH_WORKERS, BINS, COST_MODE, RESULTS_PATH, SEED, THETA
from core.coverage import COVERAGE_FUNCTIONS, f_or, min_increment_check
from core.dataset import load_prepared, prepare, read_table, save_prepared
from core.metrics import append_reports, evaluate
from core.oracle import (
    approx_ratio_sweep,
    random_tiny,
    submodularity_audit,
    write_sweep_csv,
)
from core.processor import BenchPlan, run_bench, train_model
from core.tree import TreeModel
from utils.files import atomic_write_text
from utils.logger import logger
from utils.validators import (
    is_probability,
    is_valid_cost_mode,
    is_valid_format,
    missing_columns,
    normalize_tag,
    split_tags,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _usage_error(message: str) -> int:
    logger.error(message)
    return EXIT_USAGE


# --------------------------------------------------------------------------
# prep
# --------------------------------------------------------------------------

def cmd_prep(args: argparse.Namespace) -> int:
    """Preprocess a CSV into an instance file and print its n, m, l."""
    path = Path(args.csv)
    if not path.is_file():
        return _usage_error(f"cannot read {path}")
    if missing_columns(path, [args.label]):
        return _usage_error(f"{path}: label column '{args.label}' not found")
    if not is_valid_cost_mode(args.costs):
        return _usage_error(f"unknown cost mode '{args.costs}'")
    if not is_probability(args.theta) or args.bins < 1:
        return _usage_error("theta must lie in [0, 1] and bins must be >= 1")

    name = args.name or path.stem
    table = read_table(path, args.label, split_tags(args.categorical or ""))
    prepared = prepare(table, bins=args.bins, theta=args.theta, cost_mode=args.costs, seed=args.seed, name=name)
    out = Path(args.out) if args.out else RESULTS_PATH / f"{name}.instance.json"
    save_prepared(out, prepared)

    instance = prepared.instance
    print(f"{name} & {table.n_raw} & {instance.m} & {instance.n_classes}")
    logger.info(f"Instance written to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    """Train one tag on an instance file, write the model and print the report."""
    tag = normalize_tag(args.tag)
    if tag is None:
        return _usage_error(f"unknown algorithm tag '{args.tag}'")
    if args.lam < 0:
        return _usage_error("lambda must be non-negative")

    prepared = load_prepared(args.instance)
    outcome = train_model(prepared, tag, lam=args.lam, tune=args.tune, prune_tree=args.prune)
    report = evaluate(outcome.tree, prepared, "test", tag=tag, seed=int(prepared.meta.get("seed", 0)))

    out = Path(args.out) if args.out else Path(args.instance).with_name(f"{Path(args.instance).stem}.{tag}.model.json")
    outcome.tree.save(out)
    if args.results:
        append_reports(args.results, [report])
    if outcome.tuning is not None:
        for point in outcome.tuning.trace:
            logger.info(f"lambda={point.lam:g} validation AUC={point.auc} expected cost={point.expected_cost:.4f}")

    print(json.dumps(report.row(), sort_keys=True))
    logger.info(f"Model written to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------

def cmd_bench(args: argparse.Namespace) -> int:
    """Run the benchmark matrix of a plan file."""
    plan = BenchPlan.load(args.plan)
    if args.out:
        plan.out_dir = args.out
    outcome = asyncio.run(run_bench(plan, workers=args.workers))
    print(f"cells: {outcome.ran} run, {outcome.skipped} skipped, {len(outcome.failures)} failed")
    for failure in outcome.failures:
        print(f"FAILED {failure.cell}: {failure.error_message}")
    return EXIT_OK if outcome.success else EXIT_FAILURE


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def cmd_export(args: argparse.Namespace) -> int:
    """Render a model file as Graphviz DOT or canonical JSON."""
    if not is_valid_format(args.format):
        return _usage_error(f"unknown export format '{args.format}'")
    fmt = args.format.lower()
    tree = TreeModel.load(args.model)
    out = Path(args.out) if args.out else Path(args.model).with_suffix(f".{fmt}")
    if fmt == "dot":
        atomic_write_text(out, tree.to_dot())
    else:
        tree.save(out)
    print(out)
    return EXIT_OK


# --------------------------------------------------------------------------
# audit
# --------------------------------------------------------------------------

def _sign_flipped(instance, i, node, pairs_root):
    return -f_or(instance, i, node, pairs_root)


def cmd_audit(args: argparse.Namespace) -> int:
    """
    Coverage-property audit, minimum-increment check and greedy/optimal
    ratio sweep over seeded tiny instances.
    """
    functions = dict(COVERAGE_FUNCTIONS)
    if args.self_test:
        logger.warning("Self-test: auditing a sign-flipped f_or, a failure is expected")
        functions["f_or"] = _sign_flipped

    failed = False
    for k in range(args.count):
        rng = np.random.default_rng(args.seed + k)
        tiny = random_tiny(rng, max_objects=6, max_tests=6)
        audit = submodularity_audit(tiny, functions)
        if not audit.passed:
            print(f"AUDIT FAILED (instance seed {args.seed + k}): {json.dumps(audit.counterexample)}")
            failed = True
            break
        increments = min_increment_check(tiny.instance)
        if not increments.passed:
            print(f"MIN-INCREMENT FAILED (instance seed {args.seed + k}): {increments}")
            failed = True
            break

    lambdas = [float(x) for x in split_tags(args.lambdas)]
    sweep = approx_ratio_sweep(args.seed, args.count, lambdas=lambdas, max_cost=args.max_cost)
    out = Path(args.out) if args.out else RESULTS_PATH / "ratio_sweep.csv"
    write_sweep_csv(out, sweep.rows)
    for message in sweep.failures:
        print(f"SWEEP FAILED: {message}")
    failed = failed or not sweep.passed

    print(f"audited {args.count} instances; max greedy/optimal ratio {sweep.max_ratio:.4f}; sweep rows in {out}")
    return EXIT_FAILURE if failed else EXIT_OK


# --------------------------------------------------------------------------
# Registration
# --------------------------------------------------------------------------

def register_commands(subparsers: argparse._SubParsersAction) -> None:
    """Register all subcommands on the top-level parser."""
    prep = subparsers.add_parser("prep", help="preprocess a CSV into an instance file")
    prep.add_argument("csv", help="input CSV with a header row")
    prep.add_argument("--label", required=True, help="label column")
    prep.add_argument("--bins", type=int, default=BINS)
    prep.add_argument("--theta", type=float, default=THETA)
    prep.add_argument("--costs", default=COST_MODE, help="unit or random")
    prep.add_argument("--seed", type=int, default=SEED)
    prep.add_argument("--categorical", default="", help="comma separated columns forced categorical")
    prep.add_argument("--name", default="", help="dataset name (default: file stem)")
    prep.add_argument("--out", default="", help="instance JSON path")
    prep.set_defaults(handler=cmd_prep)

    train = subparsers.add_parser("train", help="train one algorithm tag")
    train.add_argument("instance", help="instance JSON from prep")
    train.add_argument("--tag", default="enhanced")
    train.add_argument("--lambda", dest="lam", type=float, default=1.0)
    train.add_argument("--tune", action="store_true", help="choose lambda on the validation split")
    train.add_argument("--prune", action="store_true", help="post-prune on the validation split")
    train.add_argument("--results", default="", help="append the report row to this CSV")
    train.add_argument("--out", default="", help="model JSON path")
    train.set_defaults(handler=cmd_train)

    bench = subparsers.add_parser("bench", help="run a benchmark plan")
    bench.add_argument("plan", help="plan JSON")
    bench.add_argument("--workers", type=int, default=BENCH_WORKERS)
    bench.add_argument("--out", default="", help="output directory (overrides the plan)")
    bench.set_defaults(handler=cmd_bench)

    export = subparsers.add_parser("export", help="render a model file")
    export.add_argument("model", help="model JSON")
    export.add_argument("--format", default="dot", help="dot or json")
    export.add_argument("--out", default="")
    export.set_defaults(handler=cmd_export)

    audit = subparsers.add_parser("audit", help="run the exhaustive oracle checks")
    audit.add_argument("--seed", type=int, default=SEED)
    audit.add_argument("--count", type=int, default=100)
    audit.add_argument("--lambdas", default="1", help="comma separated lambda values for the ratio sweep")
    audit.add_argument("--max-cost", dest="max_cost", type=int, default=1, help="sweep test costs drawn from 1..max-cost")
    audit.add_argument("--self-test", dest="self_test", action="store_true",
                       help="audit a deliberately corrupted f_or (must fail)")
    audit.add_argument("--out", default="", help="ratio sweep CSV path")
    audit.set_defaults(handler=cmd_audit)
