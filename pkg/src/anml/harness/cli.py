"""``anml`` command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import recipes
from .experiment import run_experiment
from .report import emit_report
from .stats import summarize

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("anml")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anml", description="Quality-weighted training experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config or a built-in recipe name")
    run.add_argument("--config", required=True, help="path to a JSON config, or a recipe name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--parallelism", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--format", choices=("csv", "json", "both"), default="both")
    run.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub.add_parser("list-experiments", help="list built-in recipes")
    show = sub.add_parser("show", help="print a recipe as a JSON config")
    show.add_argument("name")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def _load_config(spec: str) -> cfgmod.ExperimentConfig:
    if spec in recipes.RECIPES and not Path(spec).exists():
        return recipes.get(spec)
    return cfgmod.load(spec)


def _print_summary(stats, out) -> None:
    header = f"{'method':<14}{'sweep':<24}{'error':>9}{'±ci':>8}{'improv':>9}{'p':>10}{'prec':>8}"
    print(header, file=out)
    for s in stats:
        point = "" if s.sweep == "" else f"{s.sweep}={s.sweep_value}"
        half = (s.ci_hi - s.ci_lo) / 2
        print(f"{s.method:<14}{point:<24}{100 * s.mean:>8.2f}%{100 * half:>7.2f}{s.improvement:>8.1f}%"
              f"{s.p_value:>10.2g}{100 * s.precision:>7.1f}%", file=out)


def _run(args) -> int:
    try:
        if args.trials is not None and args.trials < 1:
            raise cfgmod.ConfigError("--trials must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise cfgmod.ConfigError("--seed must be >= 0")
        if args.parallelism < 1:
            raise cfgmod.ConfigError("--parallelism must be >= 1")
        config = _load_config(args.config).with_overrides(trials=args.trials, base_seed=args.seed)
    except cfgmod.ConfigError as exc:
        print(f"anml: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(done, total):
        log.info("cell %d/%d", done, total)

    try:
        result = run_experiment(config, parallelism=args.parallelism, progress=progress)
        baseline = "uniform" if config["experiment"] == "detectability" else config["baseline"]
        stats = summarize(result.trials, baseline)
        paths = emit_report(result.trials, stats, args.format, args.out, config, result.wall_time)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"anml: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(stats, sys.stdout)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    if args.command == "list-experiments":
        for name in recipes.names():
            print(f"{name:<14}{recipes.RECIPES[name]['description']}")
        return EXIT_OK
    if args.command == "show":
        if args.name not in recipes.RECIPES:
            print(f"anml: unknown recipe {args.name!r}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(recipes.recipe_dict(args.name), indent=2, ensure_ascii=False))
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(cfgmod.schema(), indent=2))
        return EXIT_OK
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
