"""Simple Record class for validated, file-backed data."""

import json
import logging
from pathlib import Path
from typing import Any, Mapping, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError, parse_obj_as

from .error import DataError


LOGGER = logging.getLogger(__name__)

RecordType = TypeVar("RecordType", bound="Record")


class Record(BaseModel):
    """Record Interface Definition."""

    class Config:
        """Record Config."""

        allow_population_by_field_name = True
        json_encoders = {np.ndarray: lambda value: value.tolist()}

    def serialize(self) -> dict:
        """Serialize an instance of record to dictionary."""
        return json.loads(self.json())

    @classmethod
    def deserialize(cls: Type[RecordType], value: Mapping[str, Any]) -> RecordType:
        """Deserialize an instance of record."""
        try:
            return parse_obj_as(cls, value)
        except ValidationError as err:
            raise DataError(
                "Invalid {}: {}".format(cls.__name__, err), error_code="validation"
            ) from err

    def json(self, **kwargs):
        """Dump to json."""
        kwargs.setdefault("exclude_none", True)
        kwargs.setdefault("by_alias", True)
        return super().json(**kwargs)

    def to_file(self, path: Union[str, Path]) -> Path:
        """Write this record as an indented, key-sorted JSON document."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.serialize(), indent=2, sort_keys=True)
        path.write_text(text + "\n")
        LOGGER.debug("Wrote %s to %s", type(self).__name__, path)
        return path

    @classmethod
    def from_file(cls: Type[RecordType], path: Union[str, Path]) -> RecordType:
        """Read a record from a JSON document."""
        path = Path(path)
        try:
            value = json.loads(path.read_text())
        except FileNotFoundError as err:
            raise DataError("File not found: {}".format(path)) from err
        except json.JSONDecodeError as err:
            raise DataError("Malformed JSON in {}: {}".format(path, err)) from err
        return cls.deserialize(value)


class FrozenRecord(Record):
    """Immutable record; safe to share between threads."""

    class Config:
        """FrozenRecord Config."""

        frozen = True
