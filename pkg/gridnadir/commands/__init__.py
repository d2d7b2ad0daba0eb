"""Command line subcommands."""

from .command_types import COMMAND_TYPES, resolve

__all__ = ["COMMAND_TYPES", "resolve"]
