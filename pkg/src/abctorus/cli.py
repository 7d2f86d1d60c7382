"""Command line entry points.

Commands::

    abctorus build --config FILE [--stages N] [--rho R] [--l auto] --out DIR
    abctorus verify PATH...
    abctorus compare DIRA DIRB

Exit codes: 0 all checks pass, 1 a verdict failed, 2 usage or parse error.
The environment variable ABC_THREADS caps worker parallelism.
"""
from __future__ import annotations

import argparse
import json
import sys

from .pipeline import (ConfigError, RunConfig, compare_runs, load_config,
                       run_build, verify_paths, write_artifacts)
from .words import WordError

EXIT_PASS = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2


def _parse_l(text: str):
    if text == "auto":
        return None  # expand per stage later
    try:
        vals = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"--l expects 'auto' or a comma list, got {text!r}")
    return vals


def _build(args) -> int:
    import dataclasses

    overrides: dict = {}
    if args.stages is not None:
        overrides["stages"] = args.stages
    if args.rho is not None:
        overrides["rho"] = args.rho
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        if "stages" in overrides:
            n = overrides["stages"]
            overrides.setdefault("k_schedule", (2,) * n)
            overrides.setdefault("l_schedule", (2,) * n)
            overrides.setdefault("s_schedule", (2,) * (n + 1))
        cfg = RunConfig(**overrides) if overrides else RunConfig()
    if args.l is not None:
        sched = ("auto",) * cfg.stages if args.l == "auto" else _parse_l(args.l)
        cfg = dataclasses.replace(cfg, l_schedule=sched)
    result = run_build(cfg)
    out = write_artifacts(result, cfg.out_dir)
    print(f"wrote {out}/report.json")
    ok = result.report.get("all_pass", False)
    print("verdict:", "PASS" if ok else "FAIL")
    return EXIT_PASS if ok else EXIT_VERDICT


def _verify(args) -> int:
    report = verify_paths(args.paths)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_PASS if report["all_pass"] else EXIT_VERDICT


def _compare(args) -> int:
    report = compare_runs(args.dir_a, args.dir_b)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_PASS if report.get("ok", True) else EXIT_VERDICT


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="abctorus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="run the staged construction")
    b.add_argument("--config", help="key = value configuration file")
    b.add_argument("--stages", type=int)
    b.add_argument("--rho", type=float)
    b.add_argument("--l", help="'auto' or comma-separated repetition counts")
    b.add_argument("--out", help="output directory")

    v = sub.add_parser("verify", help="re-check persisted artifacts")
    v.add_argument("paths", nargs="+")

    c = sub.add_parser("compare", help="compare two build directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        if args.command == "build":
            return _build(args)
        if args.command == "verify":
            return _verify(args)
        return _compare(args)
    except (ConfigError, WordError, FileNotFoundError, json.JSONDecodeError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
