"""gen-dataset: labelled security samples for one area."""

from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import ClassVar, Optional

from .. import sfr
from ..base import Command, RunContext
from ..dataset import DatasetConfig, SnapshotSet, generate, write_dataset
from ..planner import load_system
from .command_types import GEN_DATASET

LOGGER = logging.getLogger(__name__)

OVERRIDES = ("clusters", "cluster_sample", "n_epc", "n_dlc", "epc_max", "threshold")


class GenDataset(Command):
    """Generate and write a dataset."""

    command_name: ClassVar[str] = GEN_DATASET

    fleet: Path
    snapshots: Path
    config: Optional[Path] = None
    system: Optional[Path] = None
    clusters: Optional[int] = None
    cluster_sample: Optional[int] = None
    n_epc: Optional[int] = None
    n_dlc: Optional[int] = None
    epc_max: Optional[float] = None
    threshold: Optional[float] = None
    out: Path

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add gen-dataset arguments."""
        parser.add_argument(
            "--fleet", type=Path, required=True, help="AreaDynamicModel JSON of the area"
        )
        parser.add_argument(
            "--snapshots", type=Path, required=True, help="SnapshotSet JSON"
        )
        parser.add_argument("--config", type=Path, help="DatasetConfig JSON")
        parser.add_argument(
            "--system",
            type=Path,
            help="System directory; bounds EPC by the area's HVDC headroom",
        )
        parser.add_argument("--clusters", type=int)
        parser.add_argument("--cluster-sample", type=int)
        parser.add_argument("--n-epc", type=int)
        parser.add_argument("--n-dlc", type=int)
        parser.add_argument("--epc-max", type=float, help="MW")
        parser.add_argument("--threshold", type=float)
        parser.add_argument("--out", type=Path, required=True)

    @property
    def output_dir(self) -> Path:
        """Directory of the dataset."""
        return self.out.parent

    def dataset_config(self, area_id: Optional[str] = None) -> DatasetConfig:
        """Config file merged with the system headroom, overrides and the seed.

        An explicit --epc-max wins over the headroom of --system.
        """
        base = DatasetConfig.from_file(self.config) if self.config else DatasetConfig()
        values = base.serialize()
        values["seed"] = self.seed
        if self.system is not None and area_id is not None:
            values["epc_max"] = load_system(self.system).epc_headroom(area_id)
            LOGGER.info(
                "EPC bound of %s from the system: %.1f MW", area_id, values["epc_max"]
            )
        for name in OVERRIDES:
            if getattr(self, name) is not None:
                values[name] = getattr(self, name)
        return DatasetConfig.deserialize(values)

    async def handle(self, context: RunContext):
        """Generate the dataset."""
        await super().handle(context)
        context.record_input("fleet", self.fleet)
        context.record_input("snapshots", self.snapshots)
        context.record_input("config", self.config)
        context.record_input("system", self.system)
        fleet = sfr.AreaDynamicModel.from_file(self.fleet)
        snapshots = SnapshotSet.from_file(self.snapshots)
        config = self.dataset_config(snapshots.area_id)
        dataset = generate(fleet, snapshots.snapshots, config, jobs=self.jobs)
        context.record_artifact(write_dataset(dataset, self.out))
