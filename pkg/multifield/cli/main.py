import argparse
import logging
import sys
from typing import List, Optional

from multifield.core.settings import settings
from multifield.cli.commands import export_command, list_command, run_command, schema_command


def configure_logging(verbose: bool = False) -> None:
    """Configure the root logger once from LOG_LEVEL and LOG_FORMAT."""
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format=settings.LOG_FORMAT, stream=sys.stderr, force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multifield",
        description="Scenario runner for multifield continua with manifold-valued order parameters",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("config", help="scenario JSON file or bundled scenario name")
    run.add_argument("--out", default=None, help="output directory for the reports")
    run.add_argument("--strict", action="store_true", help="raise on tolerance-based validations")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="log at DEBUG level")

    commands.add_parser("list", help="list bundled scenarios")

    export = commands.add_parser("export", help="export one report series as CSV")
    export.add_argument("report", help="summary.json or the report directory")
    export.add_argument("--series", required=True, help="series selector, 'task/series' or a unique series name")
    export.add_argument("--out", default=None, help="CSV file (default: standard output)")

    commands.add_parser("schema", help="print the scenario JSON schema")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors; those are validation failures here
        return 0 if e.code == 0 else 1
    configure_logging(args.verbose)

    if args.command == "run":
        return run_command(args.config, out=args.out, strict=args.strict, seed=args.seed)
    if args.command == "list":
        return list_command()
    if args.command == "export":
        return export_command(args.report, args.series, out=args.out)
    return schema_command()


if __name__ == "__main__":
    sys.exit(main())
