"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numerical failure during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import verify
from .config import ConfigError, RunConfig, from_dict, load_config
from .runner import (
    build_evaluator,
    build_spec,
    compare_directions,
    train,
    write_direction_csv,
    write_outputs,
)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
EVAL_KEYS = {"eval_task_count", "eval_adapt_steps", "seed", "checkpoint"}

log = logging.getLogger("eigenreptile")


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    return load_config(args.config, seed=args.seed, threads=args.threads,
                       output_dir=args.output)


def cmd_train(args) -> int:
    cfg = _load(args)
    try:
        outcome = train(cfg)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = write_outputs(cfg, outcome)
    print(f"wrote {out / 'metrics.csv'} and {out / 'final_summary.json'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.summary:
        raise ConfigError("--summary is required")
    summary_path = Path(args.summary)
    try:
        summary = json.loads(summary_path.read_text())
        params = np.load(summary_path.parent / summary.get("params_file", "params.npz"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"missing or unreadable training artifacts: {exc}") from None
    if "config_echo" not in summary:
        raise ConfigError("summary has no config_echo")

    options = {}
    if args.config:
        try:
            options = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read eval config: {exc}") from None
        unknown = set(options) - EVAL_KEYS
        if unknown:
            raise ConfigError(f"unknown eval config keys: {', '.join(sorted(unknown))}")
    if args.seed is not None:
        options["seed"] = args.seed
    checkpoint = options.pop("checkpoint", "final")
    if checkpoint not in ("final", "best"):
        raise ConfigError("checkpoint must be 'final' or 'best'")

    cfg = from_dict(summary["config_echo"])
    count = options.get("eval_task_count", cfg.eval_task_count)
    if not isinstance(count, int) or count < 1:
        raise ConfigError("eval_task_count must be a positive integer")
    spec = build_spec(cfg)
    evaluate = build_evaluator(cfg, spec, task_count=count,
                               adapt_steps=options.get("eval_adapt_steps"),
                               seed=options.get("seed", cfg.seed + 1))
    mean, ci = evaluate(params[checkpoint])
    metric = "grid_mse" if cfg.task_family == "sine" else "accuracy"
    report = {"metric": metric, "mean": mean, "ci95": ci, "tasks": count, "checkpoint": checkpoint}
    print(json.dumps(report))
    if args.output:
        Path(args.output).mkdir(parents=True, exist_ok=True)
        (Path(args.output) / "eval.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    unknown = [n for n in names if n not in verify.SUITES]
    if unknown:
        raise ConfigError(f"unknown suite {unknown[0]!r}; choose from "
                          f"{', '.join([*verify.SUITES, 'all'])}")
    ok = True
    for name in names:
        res = verify.SUITES[name]()
        ok &= res.passed
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name:<18} {res.detail}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_compare_directions(args) -> int:
    cfg = _load(args)
    if cfg.task_family != "sine":
        raise ConfigError("compare-directions needs the sine task family")
    if cfg.eval_task_count < 1:
        raise ConfigError("compare-directions needs eval_task_count >= 1")
    try:
        rows, outcomes = compare_directions(cfg)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_direction_csv(out / "directions.csv", rows)
    for name, outcome in outcomes.items():
        write_outputs(cfg, outcome, out / name)
    print(f"wrote {out / 'directions.csv'}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "compare-directions": cmd_compare_directions,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenreptile", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="task-parallel inner loops")
        p.add_argument("--output", help="output directory")

    common(sub.add_parser("train", help="meta-train and write metrics.csv"))
    p = sub.add_parser("eval", help="evaluate trained parameters on fresh tasks")
    common(p)
    p.add_argument("--summary", help="final_summary.json from a training run")
    p = sub.add_parser("verify", help="run numerical verification suites")
    p.add_argument("suite", help="theorem1, theorem2, snr, gram-equivalence or all")
    common(sub.add_parser("compare-directions", help="train all four update rules on sine"))
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
