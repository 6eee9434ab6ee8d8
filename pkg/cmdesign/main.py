"""
Command-line entry point.

Parses arguments, sets up logging and runs the requested subcommand,
mapping library errors to exit codes.
"""

import json
import logging
import sys

from cmdesign.cli.commands import build_parser, execute_command
from cmdesign.errors import CmdesignError, UsageError

logger = logging.getLogger("cmdesign")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int) -> None:
    """WARNING by default, INFO with -v, DEBUG with -vv; always to stderr."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def _report_usage(e: UsageError, argv: list[str]) -> int:
    if "--json" in argv:
        sys.stderr.write(json.dumps(e.to_dict(), indent=4) + "\n")
    else:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"error: {e.message}\n")
    return e.exit_code


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        return _report_usage(e, argv)
    configure_logging(args.verbose)

    try:
        return execute_command(args.command, args)
    except CmdesignError as e:
        if args.json:
            sys.stderr.write(json.dumps(e.to_dict(), indent=4) + "\n")
        else:
            sys.stderr.write(f"error: {e.message}\n")
        return e.exit_code
    except OSError as e:
        # unreadable or unwritable files
        error = CmdesignError(str(e))
        if args.json:
            sys.stderr.write(json.dumps(error.to_dict(), indent=4) + "\n")
        else:
            sys.stderr.write(f"error: {e}\n")
        return error.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
