"""gridnadir command line.

Exit codes: 0 success, 1 domain or solver failure, 2 usage error, 3 missing
solver executable.
"""

from argparse import ArgumentParser
import asyncio
import logging
import sys
from typing import Optional, Sequence

from . import __version__
from .base import RunContext
from .base.error import BaseError
from .commands import COMMAND_TYPES, resolve
from .manifest import RunManifest, write_manifest

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("debug", "info", "warning", "error")


def build_parser() -> ArgumentParser:
    """Top-level parser with one subparser per command."""
    parser = ArgumentParser(prog="gridnadir")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMAND_TYPES:
        command = resolve(name)
        subparser = subparsers.add_parser(
            name, help=(command.__doc__ or "").strip().splitlines()[0]
        )
        subparser.add_argument("--seed", type=int, default=0)
        subparser.add_argument("--jobs", type=int, default=1)
        subparser.add_argument("--log-level", choices=LOG_LEVELS, default="warning")
        command.configure_parser(subparser)
    return parser


def configure_logging(level: str):
    """Configure the root logger once."""
    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel(level.upper())


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not namespace.command:
        parser.print_usage(sys.stderr)
        return 2
    configure_logging(namespace.log_level)
    try:
        command = resolve(namespace.command).deserialize(vars(namespace))
        context = RunContext(seed=command.seed, jobs=command.jobs)
        asyncio.run(command.handle(context))
        manifest = RunManifest.build(
            command.command,
            command.serialize(),
            context.inputs,
            context.artifacts,
            seed=command.seed,
            relative_to=command.output_dir,
        )
        write_manifest(manifest, command.output_dir)
    except BaseError as err:
        LOGGER.debug("Command failed", exc_info=True)
        print("gridnadir {}: {}".format(namespace.command, err.message), file=sys.stderr)
        return err.exit_code
    return 0


def main():
    """Console script entry point."""
    sys.exit(dispatch())
