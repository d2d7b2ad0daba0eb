"""Dataset generation and tree training through the command line."""

import json
import logging

import numpy as np

from gridnadir.dataset import read_dataset
from gridnadir.manifest import RunManifest
from gridnadir.wodt import ObliqueTree, predict_many, read_regions

LOGGER = logging.getLogger(__name__)


def pipeline(run, directory, fleet, snapshots, dataset_config, seed=3):
    """gen-dataset then train-wodt into directory."""
    dataset = directory / "dataset.csv"
    tree = directory / "tree.json"
    run(
        "gen-dataset",
        "--fleet",
        fleet,
        "--snapshots",
        snapshots,
        "--config",
        dataset_config,
        "--seed",
        seed,
        "--out",
        dataset,
    )
    run(
        "train-wodt",
        "--dataset",
        dataset,
        "--depth",
        2,
        "--random-starts",
        3,
        "--seed",
        seed,
        "--out",
        tree,
    )
    return dataset, tree


def test_same_seed_same_artifacts(tmp_path, run, fleet, snapshots, dataset_config):
    first = pipeline(run, tmp_path / "one", fleet, snapshots, dataset_config)
    second = pipeline(run, tmp_path / "two", fleet, snapshots, dataset_config)
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()
    assert (tmp_path / "one" / "tree.regions.csv").read_bytes() == (
        tmp_path / "two" / "tree.regions.csv"
    ).read_bytes()


def test_regions_agree_with_the_tree(tmp_path, run, fleet, snapshots, dataset_config):
    dataset_path, tree_path = pipeline(run, tmp_path, fleet, snapshots, dataset_config)
    dataset = read_dataset(dataset_path)
    assert len(dataset) == 3 * 8 * 3 * 2
    tree = ObliqueTree.load(tree_path)
    regions = read_regions(tmp_path / "tree.regions.csv")
    predicted = predict_many(tree, dataset.features)
    inside = np.array(
        [any(region.contains(row) for region in regions) for row in dataset.features]
    )
    np.testing.assert_array_equal(inside, predicted == 0)


def test_evaluation_and_manifest(tmp_path, run, fleet, snapshots, dataset_config):
    dataset, tree = pipeline(run, tmp_path, fleet, snapshots, dataset_config)
    run(
        "eval-wodt",
        "--tree",
        tree,
        "--dataset",
        dataset,
        "--sweep",
        1,
        2,
        "--out",
        tmp_path / "evaluation.json",
    )
    evaluation = json.loads((tmp_path / "evaluation.json").read_text())
    LOGGER.debug("evaluation %s", evaluation)
    assert 0.5 <= evaluation["accuracy"] <= 1.0
    assert (tmp_path / "depth_sweep.csv").exists()

    manifest = RunManifest.from_file(tmp_path / "train-wodt.manifest.json")
    assert set(manifest.artifacts) == {"tree.json", "tree.regions.csv"}
    assert all(manifest.verify(tmp_path).values())
