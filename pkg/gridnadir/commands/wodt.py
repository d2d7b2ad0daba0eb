"""train-wodt and eval-wodt."""

from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import ClassVar, List, Optional

import pandas as pd
from pydantic import Field
from typing_extensions import Annotated

from ..base import Command, RunContext
from ..dataset import read_dataset
from ..wodt import (
    ObliqueTree,
    WodtConfig,
    depth_sweep,
    evaluate,
    extract_secure_regions,
    fit_dataset,
    write_regions,
)
from .command_types import EVAL_WODT, TRAIN_WODT

LOGGER = logging.getLogger(__name__)


class TrainWodt(Command):
    """Fit a tree and export its secure regions."""

    command_name: ClassVar[str] = TRAIN_WODT

    dataset: Path
    depth: Annotated[int, Field(ge=0)] = 3
    random_starts: Annotated[int, Field(ge=0)] = 8
    min_samples: Annotated[int, Field(ge=2)] = 20
    purity_stop: Annotated[float, Field(gt=0.5, le=1)] = 0.995
    out: Path
    regions: Optional[Path] = None

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add train-wodt arguments."""
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--depth", type=int, default=3)
        parser.add_argument("--random-starts", type=int, default=8)
        parser.add_argument("--min-samples", type=int, default=20)
        parser.add_argument("--purity-stop", type=float, default=0.995)
        parser.add_argument("--out", type=Path, required=True, help="Tree JSON")
        parser.add_argument(
            "--regions", type=Path, help="Region CSV; defaults to <out stem>.regions.csv"
        )

    @property
    def output_dir(self) -> Path:
        """Directory of the tree."""
        return self.out.parent

    @property
    def regions_path(self) -> Path:
        """Where the secure regions go."""
        return self.regions or self.out.with_name(self.out.stem + ".regions.csv")

    async def handle(self, context: RunContext):
        """Train the tree."""
        await super().handle(context)
        context.record_input("dataset", self.dataset)
        dataset = read_dataset(self.dataset)
        config = WodtConfig(
            max_depth=self.depth,
            purity_stop=self.purity_stop,
            min_samples=self.min_samples,
            random_starts=self.random_starts,
            seed=self.seed,
            jobs=self.jobs,
        )
        tree = fit_dataset(dataset, config)
        context.record_artifact(tree.to_file(self.out))
        regions = extract_secure_regions(tree)
        context.record_artifact(write_regions(regions, self.regions_path))
        LOGGER.info(
            "Trained depth-%d tree with %d leaves, %d secure regions",
            tree.depth,
            len(tree.leaves),
            len(regions),
        )


class EvalWodt(Command):
    """Score a tree on a dataset, optionally sweeping depths."""

    command_name: ClassVar[str] = EVAL_WODT

    tree: Path
    dataset: Path
    out: Path
    sweep: Optional[List[int]] = None
    sweep_out: Optional[Path] = None

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add eval-wodt arguments."""
        parser.add_argument("--tree", type=Path, required=True)
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--out", type=Path, required=True, help="Evaluation JSON")
        parser.add_argument(
            "--sweep",
            type=int,
            nargs="+",
            help="Depths to retrain and compare with the axis-aligned tree",
        )
        parser.add_argument("--sweep-out", type=Path)

    @property
    def output_dir(self) -> Path:
        """Directory of the evaluation."""
        return self.out.parent

    async def handle(self, context: RunContext):
        """Evaluate the tree."""
        await super().handle(context)
        context.record_input("tree", self.tree)
        context.record_input("dataset", self.dataset)
        tree = ObliqueTree.load(self.tree)
        dataset = read_dataset(self.dataset)
        evaluation = evaluate(tree, dataset.features, dataset.labels)
        LOGGER.info("Accuracy %.4f on %d rows", evaluation.accuracy, evaluation.samples)
        context.record_artifact(evaluation.to_file(self.out))
        if self.sweep:
            config = tree.train_config.copy(update={"seed": self.seed, "jobs": self.jobs})
            reports = depth_sweep(dataset, self.sweep, config)
            path = self.sweep_out or self.out.with_name("depth_sweep.csv")
            path.parent.mkdir(parents=True, exist_ok=True)
            frame = pd.DataFrame([report.dict() for report in reports])
            frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
            context.record_artifact(path)
