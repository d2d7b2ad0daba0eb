"""Simulation-based generation of the labelled frequency-nadir dataset.

Operating snapshots are perturbed, reduced to representatives by k-medoids
clustering on their aggregated parameters, and swept over imbalances and
randomized EFC schemes. Every case is simulated with the multi-machine area
model and labelled insecure when its nadir exceeds the threshold.
"""

from concurrent.futures import ProcessPoolExecutor
import logging
import math
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import Field, root_validator, validator
from scipy.spatial.distance import cdist
from typing_extensions import Annotated, Literal

from . import sfr
from .aggregation import EquivalentParams, FeatureVector, area_params
from .base import FrozenRecord, Record
from .base.error import DataError, SimulationError
from .definition import FEATURE_ORDER, FEATURE_ORDER_VERSION, current_version, is_supported
from .seeds import derive_seed

LOGGER = logging.getLogger(__name__)

SECURE = 0
INSECURE = 1
LABEL_NAMES = {SECURE: "secure", INSECURE: "insecure"}

PerturbationTarget = Literal["inertia", "droop", "hp_fraction"]


class OperationSnapshot(FrozenRecord):
    """Commitment status and total load of one area at one hour."""

    area_id: str
    commitments: List[bool]
    total_load: Annotated[float, Field(description="MW", gt=0)]


class SnapshotSet(Record):
    """Historical operating snapshots of one area."""

    area_id: str
    snapshots: List[OperationSnapshot]


class PerturbationSpec(FrozenRecord):
    """Uniform multiplicative perturbation of dynamic parameters."""

    relative_width: Annotated[float, Field(ge=0, lt=1)] = 0.5
    targets: Tuple[PerturbationTarget, ...] = ("inertia", "droop", "hp_fraction")
    seed: Annotated[int, Field(ge=0)] = 0


class DatasetConfig(FrozenRecord):
    """Sweep settings for dataset generation."""

    imbalance_grid: List[float] = list(np.linspace(-400.0, 400.0, 40))
    n_epc: Annotated[int, Field(ge=1)] = 10
    n_dlc: Annotated[int, Field(ge=1)] = 10
    epc_max: Annotated[
        float,
        Field(description="EPC magnitude bound in MW, the area HVDC headroom", ge=0),
    ] = 300.0
    dlc_fraction: Annotated[float, Field(description="DLC max per load", ge=0)] = 0.02
    damping_per_load: Annotated[
        float, Field(description="D_load per MW of load, MW per p.u. per MW")
    ] = 1.0
    clusters: Annotated[int, Field(ge=1)] = 50
    cluster_sample: Annotated[
        Optional[int],
        Field(description="Cluster a seeded subsample of this many snapshots", ge=1),
    ] = None
    epc_delay: Annotated[float, Field(ge=0)] = 0.2
    dlc_delay: Annotated[float, Field(ge=0)] = 0.6
    dt: Annotated[float, Field(gt=0)] = sfr.DEFAULT_DT
    horizon: Annotated[float, Field(gt=0)] = sfr.DEFAULT_HORIZON
    threshold: Annotated[float, Field(description="Hz", gt=0)] = 0.5
    band: Tuple[float, float] = (0.4, 0.6)
    seed: Annotated[int, Field(ge=0)] = 0
    relative_width: Annotated[float, Field(ge=0, lt=1)] = 0.5

    @validator("band")
    @classmethod
    def _band_ordered(cls, value):
        if value[0] > value[1]:
            raise ValueError("band lower bound exceeds upper bound")
        return value

    @root_validator(skip_on_failure=True)
    @classmethod
    def _threshold_inside_band(cls, values):
        low, high = values["band"]
        if not low <= values["threshold"] <= high:
            raise ValueError("threshold must lie inside the band")
        return values


class Case(FrozenRecord):
    """One imbalance plus EFC scheme to simulate."""

    index: int
    imbalance: float
    efc: sfr.EfcAction


class LabeledSample(FrozenRecord):
    """Feature vector with its simulated nadir and label."""

    features: FeatureVector
    nadir: Annotated[float, Field(description="Hz", ge=0)]
    label: Literal[0, 1]

    @property
    def label_name(self) -> str:
        """Human readable label."""
        return LABEL_NAMES[self.label]


class DatasetHeader(Record):
    """Provenance block written as comment lines."""

    version: str = current_version("dataset")
    feature_order: Tuple[str, ...] = FEATURE_ORDER
    feature_order_version: str = FEATURE_ORDER_VERSION
    threshold_hz: float
    band: Tuple[float, float]
    seed: int
    count_secure: int = 0
    count_insecure: int = 0


class Dataset:
    """Labelled samples stored column-wise."""

    def __init__(
        self,
        header: DatasetHeader,
        features: np.ndarray,
        nadirs: np.ndarray,
        labels: np.ndarray,
        sources: Optional[np.ndarray] = None,
    ):
        """Initialize and check the header counts against the rows."""
        self.features = np.asarray(features, dtype=float).reshape(-1, len(FEATURE_ORDER))
        self.nadirs = np.asarray(nadirs, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.sources = sources
        insecure = int(self.labels.sum())
        counts = (len(self.labels) - insecure, insecure)
        if (header.count_secure, header.count_insecure) != counts:
            raise DataError(
                "Dataset header counts {} do not match rows {}".format(
                    (header.count_secure, header.count_insecure), counts
                )
            )
        self.header = header

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[LabeledSample]:
        for row, nadir, label in zip(self.features, self.nadirs, self.labels):
            yield LabeledSample(
                features=FeatureVector.from_array(row), nadir=nadir, label=int(label)
            )

    @classmethod
    def from_arrays(
        cls,
        features: np.ndarray,
        nadirs: np.ndarray,
        labels: np.ndarray,
        threshold: float = 0.5,
        band: Tuple[float, float] = (0.0, math.inf),
        seed: int = 0,
        sources: Optional[np.ndarray] = None,
    ) -> "Dataset":
        """Build a dataset, filling the header counts from the labels."""
        labels = np.asarray(labels, dtype=int)
        header = DatasetHeader(
            threshold_hz=threshold,
            band=band,
            seed=seed,
            count_secure=int((labels == SECURE).sum()),
            count_insecure=int((labels == INSECURE).sum()),
        )
        return cls(header, features, nadirs, labels, sources)

    def insecure_share(self) -> float:
        """Fraction of insecure rows."""
        return float(self.labels.mean()) if len(self) else 0.0


def perturb(model: sfr.AreaDynamicModel, spec: PerturbationSpec) -> sfr.AreaDynamicModel:
    """Scale targeted parameters by independent uniform draws in [1-w, 1+w]."""
    rng = np.random.default_rng(spec.seed)
    low, high = 1.0 - spec.relative_width, 1.0 + spec.relative_width
    targets = set(spec.targets)

    def factor(target: str) -> float:
        # always draw so the stream does not depend on the target set
        value = rng.uniform(low, high)
        return value if target in targets else 1.0

    thermal = []
    for unit in model.thermal:
        inertia, droop, fraction = factor("inertia"), factor("droop"), factor("hp_fraction")
        thermal.append(
            unit.copy(
                update={
                    "inertia_const": unit.inertia_const * inertia,
                    "droop": unit.droop * droop,
                    "hp_fraction": min(1.0, max(0.0, unit.hp_fraction * fraction)),
                }
            )
        )
    hydro = []
    for unit in model.hydro:
        inertia, droop = factor("inertia"), factor("droop")
        hydro.append(
            unit.copy(
                update={
                    "inertia_const": unit.inertia_const * inertia,
                    "perm_droop": unit.perm_droop * droop,
                }
            )
        )
    storage = [
        unit.copy(update={"droop": unit.droop * factor("droop")}) for unit in model.storage
    ]
    return model.copy(update={"thermal": thermal, "hydro": hydro, "storage": storage})


def _standardized(points: np.ndarray) -> np.ndarray:
    std = points.std(axis=0)
    std[std == 0] = 1.0
    return (points - points.mean(axis=0)) / std


def _pam(distances: np.ndarray, k: int) -> List[int]:
    n = len(distances)
    # BUILD: greedy medoid selection
    medoids = [int(np.argmin(distances.sum(axis=1)))]
    nearest = distances[:, medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - distances, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        chosen = int(np.argmax(gains))
        medoids.append(chosen)
        nearest = np.minimum(nearest, distances[:, chosen])

    # SWAP: apply the best improving swap until none remains
    while True:
        to_medoids = distances[:, medoids]
        order = np.argsort(to_medoids, axis=1, kind="stable")
        closest = order[:, 0]
        first = to_medoids[np.arange(n), closest]
        second = (
            to_medoids[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        )
        best_delta, best_swap = -1e-12, None
        for position in range(k):
            owned = (closest == position)[:, None]
            replaced = np.where(
                owned,
                np.minimum(distances, second[:, None]),
                np.minimum(distances, first[:, None]),
            )
            delta = (replaced - first[:, None]).sum(axis=0)
            delta[medoids] = np.inf
            candidate = int(np.argmin(delta))
            if delta[candidate] < best_delta:
                best_delta, best_swap = delta[candidate], (position, candidate)
        if best_swap is None:
            return medoids
        position, candidate = best_swap
        medoids[position] = candidate


def kmedoids(
    points: Sequence[Union[EquivalentParams, Sequence[float]]],
    k: int,
    seed: int = 0,
    max_points: Optional[int] = None,
) -> List[int]:
    """Indices of k representative points (PAM on z-scored coordinates).

    PAM runs on the full distance matrix. When max_points is given and
    exceeded, a seeded subsample is clustered instead and the medoids are
    mapped back to indices of the full input.
    """
    if not len(points):
        raise DataError("k-medoids needs at least one point")
    if k <= 0:
        raise DataError("k must be positive, got {}".format(k))
    if k > len(points):
        raise DataError("k={} exceeds the number of points {}".format(k, len(points)))
    array = np.array(
        [p.as_array() if isinstance(p, EquivalentParams) else p for p in points],
        dtype=float,
    )
    if not np.all(np.isfinite(array)):
        raise DataError("k-medoids points must be finite")
    if k == len(array):
        return list(range(k))
    subset = np.arange(len(array))
    if max_points is not None and len(array) > max_points:
        LOGGER.warning(
            "Clustering a subsample of %d out of %d points", max_points, len(array)
        )
        rng = np.random.default_rng(seed)
        subset = np.sort(rng.choice(len(array), size=max_points, replace=False))
    standardized = _standardized(array)[subset]
    medoids = _pam(cdist(standardized, standardized), k)
    return sorted(int(subset[index]) for index in medoids)


def enumerate_cases(
    snapshot: OperationSnapshot,
    imbalance_grid: Sequence[float],
    n_epc: int,
    n_dlc: int,
    seed: int,
    epc_max: float = 300.0,
    dlc_max: Optional[float] = None,
    epc_delay: float = 0.2,
    dlc_delay: float = 0.6,
) -> List[Case]:
    """Cross product of imbalances with randomized EPC and DLC schemes.

    EPC is a signed net injection drawn from [-epc_max, epc_max]; DLC is drawn
    from [0, dlc_max], by default 2% of the snapshot load.
    """
    if not len(imbalance_grid) or n_epc < 1 or n_dlc < 1:
        raise DataError("case grids must be non-empty")
    if dlc_max is None:
        dlc_max = 0.02 * snapshot.total_load
    rng = np.random.default_rng(seed)
    epc_draws = rng.uniform(-epc_max, epc_max, n_epc)
    dlc_draws = rng.uniform(0.0, dlc_max, n_dlc)
    cases = []
    for imbalance in imbalance_grid:
        for epc in epc_draws:
            for dlc in dlc_draws:
                cases.append(
                    Case(
                        index=len(cases),
                        imbalance=float(imbalance),
                        efc=sfr.EfcAction(
                            epc_power=float(epc),
                            dlc_power=float(dlc),
                            epc_delay=epc_delay,
                            dlc_delay=dlc_delay,
                        ),
                    )
                )
    return cases


def snapshot_model(
    fleet: sfr.AreaDynamicModel, snapshot: OperationSnapshot, damping_per_load: float
) -> sfr.AreaDynamicModel:
    """Area model with the snapshot's commitments and load damping."""
    if len(snapshot.commitments) != len(fleet.thermal):
        raise DataError(
            "Snapshot of area {} has {} commitments for {} thermal units".format(
                snapshot.area_id, len(snapshot.commitments), len(fleet.thermal)
            )
        )
    thermal = [
        unit.copy(update={"committed": bool(on)})
        for unit, on in zip(fleet.thermal, snapshot.commitments)
    ]
    return fleet.copy(
        update={
            "thermal": thermal,
            "load_damping": damping_per_load * snapshot.total_load,
        }
    )


def representative_models(
    fleet: sfr.AreaDynamicModel,
    snapshots: Sequence[OperationSnapshot],
    config: DatasetConfig,
) -> Tuple[List[int], List[sfr.AreaDynamicModel]]:
    """Perturb every snapshot, then keep the k-medoids representatives."""
    models = [
        perturb(
            snapshot_model(fleet, snapshot, config.damping_per_load),
            PerturbationSpec(
                relative_width=config.relative_width,
                seed=derive_seed(config.seed, "perturb", index),
            ),
        )
        for index, snapshot in enumerate(snapshots)
    ]
    params = [area_params(model) for model in models]
    k = min(config.clusters, len(models))
    chosen = kmedoids(
        params,
        k,
        seed=derive_seed(config.seed, "cluster"),
        max_points=config.cluster_sample,
    )
    LOGGER.info("Selected %d representative snapshots out of %d", k, len(models))
    return chosen, models


def _simulate_snapshot(job) -> Tuple[np.ndarray, np.ndarray]:
    model, snapshot, config, source = job
    cases = enumerate_cases(
        snapshot,
        config.imbalance_grid,
        config.n_epc,
        config.n_dlc,
        seed=derive_seed(config.seed, "cases", source),
        epc_max=config.epc_max,
        dlc_max=config.dlc_fraction * snapshot.total_load,
        epc_delay=config.epc_delay,
        dlc_delay=config.dlc_delay,
    )
    imbalances = np.array([case.imbalance for case in cases])
    epc = np.array([case.efc.epc_power for case in cases])
    dlc = np.array([case.efc.dlc_power for case in cases])
    try:
        response = sfr.step_response(model, config.dt, config.horizon)
    except SimulationError as err:
        raise SimulationError(
            "Snapshot {} failed: {}".format(source, err.message),
            step=err.step,
            time=err.time,
        ) from err
    nadirs = sfr.batch_nadirs(
        response,
        config.dt,
        imbalances,
        epc,
        dlc,
        config.epc_delay,
        config.dlc_delay,
        model.base_frequency,
    )
    eq = area_params(model).as_array()
    features = np.column_stack(
        [np.tile(eq, (len(cases), 1)), epc, dlc, imbalances]
    )
    return features, nadirs


def generate(
    fleet: sfr.AreaDynamicModel,
    snapshots: Sequence[OperationSnapshot],
    config: Optional[DatasetConfig] = None,
    jobs: int = 1,
) -> Dataset:
    """Simulate representatives x cases, band-filter and label the nadirs."""
    config = config or DatasetConfig()
    if not snapshots:
        raise DataError("No snapshots supplied")
    chosen, models = representative_models(fleet, snapshots, config)
    work = [(models[index], snapshots[index], config, index) for index in chosen]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_snapshot, work))
    else:
        results = [_simulate_snapshot(job) for job in work]

    low, high = config.band
    features, nadirs, sources = [], [], []
    for index, (block, block_nadirs) in zip(chosen, results):
        keep = (block_nadirs >= low) & (block_nadirs <= high)
        features.append(block[keep])
        nadirs.append(block_nadirs[keep])
        sources.append(np.full(int(keep.sum()), index))
    features = np.vstack(features)
    nadirs = np.concatenate(nadirs)
    labels = (nadirs > config.threshold).astype(int)
    dataset = Dataset.from_arrays(
        features,
        nadirs,
        labels,
        threshold=config.threshold,
        band=config.band,
        seed=config.seed,
        sources=np.concatenate(sources),
    )
    LOGGER.info(
        "Generated %d samples (%.1f%% insecure)", len(dataset), 100 * dataset.insecure_share()
    )
    return dataset


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Write comment header lines followed by the CSV table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dataset.header
    lines = [
        "# format=gridnadir-dataset/{}".format(header.version),
        "# feature_order={}".format(",".join(header.feature_order)),
        "# feature_order_version={}".format(header.feature_order_version),
        "# threshold_hz={!r}".format(header.threshold_hz),
        "# band={!r},{!r}".format(*header.band),
        "# seed={}".format(header.seed),
        "# count_secure={}".format(header.count_secure),
        "# count_insecure={}".format(header.count_insecure),
    ]
    frame = pd.DataFrame(dataset.features, columns=list(FEATURE_ORDER))
    frame["nadir_hz"] = dataset.nadirs
    frame["label"] = dataset.labels
    with path.open("w", newline="") as stream:
        stream.write("\n".join(lines) + "\n")
        frame.to_csv(stream, index=False, float_format="%.10g", lineterminator="\n")
    return path


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Read a dataset file, checking format version and feature order."""
    path = Path(path)
    meta = {}
    with path.open() as stream:
        for line in stream:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
    version = meta.get("format", "").rpartition("/")[2]
    if not is_supported("dataset", version):
        raise DataError("Unsupported dataset format in {}: {!r}".format(path, version))
    order = tuple(meta.get("feature_order", "").split(","))
    if order != FEATURE_ORDER:
        raise DataError("Feature order {} does not match {}".format(order, FEATURE_ORDER))
    frame = pd.read_csv(path, comment="#")
    band = tuple(float(value) for value in meta["band"].split(","))
    header = DatasetHeader.deserialize(
        {
            "version": version,
            "feature_order": order,
            "feature_order_version": meta.get("feature_order_version", ""),
            "threshold_hz": float(meta["threshold_hz"]),
            "band": band,
            "seed": int(meta["seed"]),
            "count_secure": int(meta["count_secure"]),
            "count_insecure": int(meta["count_insecure"]),
        }
    )
    return Dataset(
        header,
        frame[list(FEATURE_ORDER)].to_numpy(),
        frame["nadir_hz"].to_numpy(),
        frame["label"].to_numpy(),
    )
