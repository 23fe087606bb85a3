"""Command line entry point: ``sodsense <experiment> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import InvalidArgumentError
from .harness import EXPERIMENTS, ExperimentConfig, run_experiment
from .report import write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sodsense", description=__doc__)
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON config file; omitted keys take experiment defaults")
    ap.add_argument("--out", required=True, help="output directory for summary.json and CSV tables")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--trials", type=int, default=None)
    return ap


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"{path}: top level must be an object")
    return raw


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        raw = load_config(args.config)
    except OSError as exc:
        print(f"sodsense: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidArgumentError as exc:
        print(f"sodsense: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_dict(args.experiment, raw, args.seed, args.trials, args.out)
    except InvalidArgumentError as exc:
        print(f"sodsense: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    bundle = run_experiment(cfg)
    try:
        out = write_report(bundle, args.out)
    except OSError as exc:
        print(f"sodsense: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{cfg.experiment}: wrote {out / 'summary.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
