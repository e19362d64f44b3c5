"""Command-line entry point: ``quotespread <stage> --config run.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import CorpusError
from .pipeline import stages
from .pipeline.artifacts import MissingArtifact
from .pipeline.config import ConfigError, RunConfig

logger = logging.getLogger("quotespread")

_UPSTREAM = {
    "ingest/": "ingest",
    "match/": "match",
    "geo/": "geo",
    "temporal/": "temporal",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (YAML)")
    common.add_argument("--window-start", help="first day of the analysis window (ISO date)")
    common.add_argument("--window-end", help="last day of the analysis window (ISO date)")
    common.add_argument("--gyration-mode", choices=["planar", "great_circle"])
    common.add_argument("--top-k", type=int, help="size of the popularity tables")
    common.add_argument("--out-dir", help="artifact directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="quotespread",
        description="Match quotes across offline and online corpora and measure their spread.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "load, validate and deduplicate the corpora"),
        ("match", "cluster offline quotes and find online mentions"),
        ("geo", "geocode events and compute radius of gyration"),
        ("temporal", "lifespans, lead-lag and crossover statistics"),
        ("report", "popularity tables, summary and artifact manifest"),
        ("run-all", "run every stage in order"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config)
    if args.window_start is not None:
        config.window_start = args.window_start
    if args.window_end is not None:
        config.window_end = args.window_end
    if args.gyration_mode is not None:
        config.gyration_mode = args.gyration_mode
    if args.top_k is not None:
        config.top_k = args.top_k
    if args.out_dir is not None:
        # Flags are relative to the working directory, not the config file.
        config.out_dir = str(Path(args.out_dir).resolve())
    return config


def _missing_hint(path: str) -> str:
    for fragment, stage in _UPSTREAM.items():
        if fragment in path.replace("\\", "/"):
            return f"missing artifact {path}; run `quotespread {stage}` first"
    return f"missing artifact {path}"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        if args.command == "run-all":
            results = stages.run_all(config)
        else:
            command = getattr(stages, f"cmd_{args.command}")
            results = [command(config)]
    except (ConfigError, CorpusError) as exc:
        logger.error("%s", exc)
        return stages.EXIT_CONFIG
    except MissingArtifact as exc:
        logger.error("%s", _missing_hint(str(exc)))
        return stages.EXIT_MISSING

    for r in results:
        logger.info("%s: %d diagnostics, %d warnings", r.stage, len(r.diagnostics), len(r.warnings))
    return max(r.exit_code for r in results)


if __name__ == "__main__":
    sys.exit(main())
