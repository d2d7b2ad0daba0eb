"""Command base class and run context."""

from abc import ABC
from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, parse_obj_as
from pydantic.class_validators import validator
from typing_extensions import Annotated

from .error import UsageError


LOGGER = logging.getLogger(__name__)


class RunContext:
    """Per-run state shared by a command and the code it calls."""

    def __init__(self, seed: int = 0, jobs: int = 1):
        """Initialize the context."""
        self.seed = seed
        self.jobs = jobs
        self.inputs: Dict[str, str] = {}
        self.artifacts: List[Path] = []

    def record_input(self, name: str, path: Optional[Path]):
        """Remember a config or data path the run depends on."""
        if path is not None:
            self.inputs[name] = str(path)

    def record_artifact(self, path: Path) -> Path:
        """Remember a file the run produced."""
        path = Path(path)
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path


class Command(BaseModel, ABC):
    """Command Interface Definition."""

    command_name: ClassVar[str] = ""

    command: Annotated[Optional[str], Field(description="Subcommand name")] = None
    seed: Annotated[int, Field(description="Master seed", ge=0)] = 0
    jobs: Annotated[int, Field(description="Worker cap", ge=1)] = 1
    log_level: Annotated[str, Field(description="Logging level")] = "warning"

    class Config:
        """Command Config."""

        extra = "ignore"

    @validator("command", pre=True, always=True)
    @classmethod
    def _command(cls, value):
        """Set command name if not present."""
        if not value:
            return cls.command_name
        if value != cls.command_name:
            raise ValueError(
                "Invalid command for {}: {}".format(cls.__name__, value)
            )
        return value

    def serialize(self) -> dict:
        """Serialize an instance of command to dictionary."""
        return self.dict(exclude_none=True, by_alias=True)

    @classmethod
    def deserialize(cls, value: Mapping[str, Any]) -> "Command":
        """Deserialize an instance of command."""
        try:
            return parse_obj_as(cls, value)
        except ValidationError as err:
            raise UsageError(
                "Invalid arguments for {}: {}".format(cls.command_name, err)
            ) from err

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add this command's arguments to its subparser."""

    @property
    def output_dir(self) -> Path:
        """Directory the run manifest is written to."""
        return Path(".")

    async def handle(self, context: RunContext):
        """Handle a command of this type."""
        LOGGER.debug("Running command %s: %s", self.command, self.serialize())
