"""Run manifests written next to every command's outputs."""

import hashlib
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from pydantic import Field

from . import __version__
from .base import Record
from .base.error import DataError

LOGGER = logging.getLogger(__name__)

CHUNK = 1 << 16


def sha256(path: Union[str, Path]) -> str:
    """Hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as stream:
        for block in iter(lambda: stream.read(CHUNK), b""):
            digest.update(block)
    return digest.hexdigest()


class RunManifest(Record):
    """What a run read, how it was configured and what it wrote."""

    command: str
    tool_version: str = __version__
    seed: int = 0
    arguments: Dict[str, Any] = {}
    inputs: Dict[str, str] = Field({}, description="Input name to path")
    input_hashes: Dict[str, str] = Field({}, description="Input file path to sha256")
    artifacts: Dict[str, str] = Field({}, description="Artifact path to sha256")

    @classmethod
    def build(
        cls,
        command: str,
        arguments: Mapping[str, Any],
        inputs: Mapping[str, str],
        artifacts: Iterable[Path],
        seed: int = 0,
        relative_to: Optional[Path] = None,
    ) -> "RunManifest":
        """Hash the inputs that are files and every artifact."""

        def label(path: Path) -> str:
            if relative_to is not None:
                try:
                    return str(path.resolve().relative_to(relative_to.resolve()))
                except ValueError:
                    pass
            return str(path)

        input_hashes = {}
        for path in inputs.values():
            candidate = Path(path)
            if candidate.is_file():
                input_hashes[str(candidate)] = sha256(candidate)
        return cls(
            command=command,
            seed=seed,
            arguments=dict(arguments),
            inputs=dict(inputs),
            input_hashes=input_hashes,
            artifacts={label(Path(path)): sha256(path) for path in artifacts},
        )

    def verify(self, base: Union[str, Path] = ".") -> Dict[str, bool]:
        """Whether each artifact still hashes to the recorded value."""
        base = Path(base)
        results = {}
        for name, digest in self.artifacts.items():
            path = Path(name) if Path(name).is_absolute() else base / name
            if not path.exists():
                raise DataError("Artifact {} is missing".format(path))
            results[name] = sha256(path) == digest
        return results


def write_manifest(manifest: RunManifest, directory: Union[str, Path]) -> Path:
    """Write ``<command>.manifest.json`` into directory."""
    path = Path(directory) / "{}.manifest.json".format(manifest.command)
    manifest.to_file(path)
    LOGGER.info("Wrote manifest %s with %d artifacts", path, len(manifest.artifacts))
    return path
