"""Building blocks shared by every gridnadir module."""

from .command import Command, RunContext
from .model import FrozenRecord, Record

__all__ = ["Command", "FrozenRecord", "Record", "RunContext"]
