"""Weighted oblique decision tree for frequency security rules.

Each split is a hyperplane found by minimizing the sigmoid-weighted entropy
of the node with multi-start BFGS. Rows then descend by the hard sign test
``a . [z; 1] >= 0 -> right`` on standardized features. Secure leaves are
exported as polytopes ``A x + b >= 0`` in original feature units.
"""

from concurrent.futures import ThreadPoolExecutor
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import Field, validator
from scipy.optimize import minimize
from scipy.special import expit, xlogy
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import accuracy_score, confusion_matrix
from sklearn.tree import DecisionTreeClassifier
from typing_extensions import Annotated, Literal

from .aggregation import FeatureVector
from .base import FrozenRecord, Record
from .base.error import DataError
from .dataset import INSECURE, SECURE, Dataset
from .definition import FEATURE_ORDER, current_version, is_supported
from .seeds import derive_seed

LOGGER = logging.getLogger(__name__)

LN2 = math.log(2.0)
AXIS_START_SCALE = 2.0


class WodtConfig(FrozenRecord):
    """Training settings."""

    max_depth: Annotated[int, Field(ge=0)] = 3
    purity_stop: Annotated[float, Field(gt=0.5, le=1)] = 0.995
    min_samples: Annotated[int, Field(ge=2)] = 20
    random_starts: Annotated[int, Field(ge=0)] = 8
    max_iter: Annotated[int, Field(ge=1)] = 200
    gtol: Annotated[float, Field(gt=0)] = 1e-6
    seed: Annotated[int, Field(ge=0)] = 0
    jobs: Annotated[int, Field(ge=1)] = 1


class Standardization(FrozenRecord):
    """Per-feature z-score statistics."""

    mean: List[float]
    std: List[float]

    @validator("std")
    @classmethod
    def _positive(cls, value):
        if any(not s > 0 for s in value):
            raise ValueError("standard deviations must be positive")
        return value

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Original units to z-scores."""
        return (np.asarray(features, dtype=float) - self.mean) / self.std

    def inverse(self, standardized: np.ndarray) -> np.ndarray:
        """Z-scores back to original units."""
        return np.asarray(standardized, dtype=float) * self.std + self.mean


class SplitNode(FrozenRecord):
    """Hyperplane split; coefficients act on standardized features plus 1."""

    kind: Literal["split"] = "split"
    node_id: int
    coeffs: List[float]
    left: int
    right: int

    @validator("coeffs")
    @classmethod
    def _finite(cls, value):
        if not np.all(np.isfinite(value)):
            raise ValueError("split coefficients must be finite")
        return value


class LeafNode(FrozenRecord):
    """Terminal node labelled by majority."""

    kind: Literal["leaf"] = "leaf"
    node_id: int
    label: Literal[0, 1]
    purity: Annotated[float, Field(ge=0.5, le=1)]
    sample_count: Annotated[int, Field(ge=0)]
    depth: Annotated[int, Field(ge=0)]


Node = Union[SplitNode, LeafNode]


class ObliqueTree(Record):
    """Fitted tree with its standardization statistics."""

    version: str = current_version("tree")
    feature_order: Tuple[str, ...] = FEATURE_ORDER
    stats: Standardization
    train_config: WodtConfig
    depth: int
    nodes: List[Node]

    @property
    def node_map(self) -> Dict[int, Node]:
        """Nodes by id."""
        return {node.node_id: node for node in self.nodes}

    @property
    def leaves(self) -> List[LeafNode]:
        """Leaf nodes in id order."""
        return [node for node in self.nodes if isinstance(node, LeafNode)]

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ObliqueTree":
        """Read a tree, refusing unknown formats or feature orders."""
        tree = cls.from_file(path)
        if not is_supported("tree", tree.version):
            raise DataError("Unsupported tree format {!r} in {}".format(tree.version, path))
        if len(tree.feature_order) == len(FEATURE_ORDER) and tree.feature_order != (
            FEATURE_ORDER
        ):
            raise DataError(
                "Tree feature order {} does not match {}".format(
                    tree.feature_order, FEATURE_ORDER
                )
            )
        return tree


class SecureRegion(FrozenRecord):
    """Closed polytope ``A x + b >= 0`` in original feature units."""

    leaf_id: int
    coeffs: List[List[float]] = Field(description="A, one row per path split")
    bias: List[float] = Field(description="b")

    @property
    def rows(self) -> int:
        """Number of half-spaces."""
        return len(self.bias)

    def matrix(self, width: int = len(FEATURE_ORDER)) -> Tuple[np.ndarray, np.ndarray]:
        """(A, b) as arrays."""
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1, width)
        return coeffs, np.array(self.bias, dtype=float)

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        """Whether x satisfies every row within tol."""
        x = np.asarray(x, dtype=float)
        coeffs, bias = self.matrix(len(x))
        return bool(np.all(coeffs @ x + bias >= -tol))


class SplitResult(FrozenRecord):
    """Outcome of a multi-start split search."""

    coeffs: List[float]
    objective: float
    converged: bool


class DepthReport(FrozenRecord):
    """Accuracy of one depth in a sweep."""

    depth: int
    wodt_accuracy: float
    cart_accuracy: float
    wodt_test_accuracy: Optional[float] = None
    cart_test_accuracy: Optional[float] = None
    leaves: int
    secure_regions: int


class Evaluation(FrozenRecord):
    """Classification quality of a tree on labelled rows."""

    samples: int
    accuracy: float
    false_secure: int = Field(description="insecure rows predicted secure")
    false_insecure: int = Field(description="secure rows predicted insecure")


def standardize(features: np.ndarray) -> Tuple[Standardization, np.ndarray]:
    """Z-score every column; constant columns keep std 1."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or len(features) < 2:
        raise DataError("standardization needs at least two rows")
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0] = 1.0
    stats = Standardization(mean=mean.tolist(), std=std.tolist())
    return stats, stats.transform(features)


def _augmented(z: np.ndarray) -> np.ndarray:
    return np.hstack([z, np.ones((len(z), 1))])


def _weighted_entropy(weights: np.ndarray) -> float:
    total = weights.sum()
    return float((xlogy(total, total) - xlogy(weights, weights).sum()) / LN2)


def split_objective(
    a: np.ndarray, z: np.ndarray, y: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Sigmoid-weighted entropy ``W_L E_L + W_R E_R`` and its gradient in a."""
    x = _augmented(z)
    s = expit(x @ a)
    classes = (y == SECURE, y == INSECURE)
    right = np.array([s[mask].sum() for mask in classes])
    left = np.array([(1.0 - s[mask]).sum() for mask in classes])
    value = _weighted_entropy(right) + _weighted_entropy(left)

    slope = s * (1.0 - s)
    grad = np.zeros_like(a, dtype=float)
    for k, mask in enumerate(classes):
        if not mask.any():
            continue
        g = slope[mask] @ x[mask]
        coef = 0.0
        if right[k] > 0:
            coef += math.log2(right.sum() / right[k])
        if left[k] > 0:
            coef -= math.log2(left.sum() / left[k])
        grad += coef * g
    return value, grad


def hard_entropy(goes_right: np.ndarray, y: np.ndarray) -> float:
    """Weighted entropy of a hard partition."""
    value = 0.0
    for side in (goes_right, ~goes_right):
        counts = np.array([(y[side] == SECURE).sum(), (y[side] == INSECURE).sum()])
        value += _weighted_entropy(counts.astype(float))
    return value


def route_right(coeffs: Sequence[float], z: np.ndarray) -> np.ndarray:
    """Hard routing; points on the hyperplane go right."""
    return _augmented(np.atleast_2d(z)) @ np.asarray(coeffs) >= 0


def axis_aligned_start(z: np.ndarray, y: np.ndarray) -> Optional[np.ndarray]:
    """Best information-gain threshold split written as a hyperplane."""
    n, width = z.shape
    total_insecure = int(y.sum())
    best, best_value = None, math.inf
    for j in range(width):
        order = np.argsort(z[:, j], kind="stable")
        values = z[order, j]
        insecure_left = np.cumsum(y[order])[:-1].astype(float)
        count_left = np.arange(1, n, dtype=float)
        valid = values[:-1] < values[1:]
        if not valid.any():
            continue
        left = np.column_stack([count_left - insecure_left, insecure_left])
        right = np.column_stack(
            [(n - count_left) - (total_insecure - insecure_left),
             total_insecure - insecure_left]
        )
        entropy = (
            xlogy(count_left, count_left)
            - xlogy(left, left).sum(axis=1)
            + xlogy(n - count_left, n - count_left)
            - xlogy(right, right).sum(axis=1)
        ) / LN2
        entropy[~valid] = math.inf
        position = int(np.argmin(entropy))
        if entropy[position] < best_value:
            best_value = entropy[position]
            threshold = 0.5 * (values[position] + values[position + 1])
            best = np.zeros(width + 1)
            best[j] = AXIS_START_SCALE
            best[-1] = -AXIS_START_SCALE * threshold
    return best


def _logistic_start(z: np.ndarray, y: np.ndarray) -> Optional[np.ndarray]:
    if len(np.unique(y)) < 2:
        return None
    model = LogisticRegression(C=1.0, max_iter=200).fit(z, y)
    return np.concatenate([model.coef_[0], model.intercept_])


def optimize_split(
    z: np.ndarray,
    y: np.ndarray,
    config: Optional[WodtConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> SplitResult:
    """Multi-start BFGS on the split objective; the lowest final value wins."""
    config = config or WodtConfig()
    rng = rng or np.random.default_rng(config.seed)
    width = z.shape[1] + 1
    starts = [
        start
        for start in (axis_aligned_start(z, y), _logistic_start(z, y))
        if start is not None
    ]
    for _ in range(config.random_starts):
        direction = rng.standard_normal(width)
        starts.append(direction / np.linalg.norm(direction))

    def descend(start: np.ndarray):
        return minimize(
            split_objective,
            start,
            args=(z, y),
            jac=True,
            method="BFGS",
            options={"maxiter": config.max_iter, "gtol": config.gtol},
        )

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(descend, starts))
    else:
        results = [descend(start) for start in starts]

    finite = [res for res in results if np.isfinite(res.fun) and np.all(np.isfinite(res.x))]
    if not finite:
        LOGGER.warning("All split starts diverged; keeping the first start")
        value, _ = split_objective(starts[0], z, y)
        return SplitResult(coeffs=list(starts[0]), objective=value, converged=False)
    # min() keeps the earliest start on ties
    best = min(finite, key=lambda res: res.fun)
    converged = any(res.success for res in finite)
    if not converged:
        LOGGER.warning("No split start converged; best objective %.6g", best.fun)
    return SplitResult(coeffs=list(best.x), objective=float(best.fun), converged=converged)


def _leaf(node_id: int, y: np.ndarray, depth: int) -> LeafNode:
    insecure = int(y.sum())
    secure = len(y) - insecure
    # ties go to insecure
    label = INSECURE if insecure >= secure else SECURE
    purity = max(insecure, secure) / len(y) if len(y) else 1.0
    return LeafNode(
        node_id=node_id, label=label, purity=purity, sample_count=len(y), depth=depth
    )


def fit(
    features: np.ndarray,
    labels: np.ndarray,
    config: Optional[WodtConfig] = None,
    feature_order: Optional[Sequence[str]] = None,
) -> ObliqueTree:
    """Grow a tree by recursive hard partition."""
    config = config or WodtConfig()
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if features.ndim != 2 or not len(features):
        raise DataError("cannot fit a tree on an empty dataset")
    if len(labels) != len(features):
        raise DataError("feature and label row counts differ")
    if not np.all(np.isfinite(features)):
        raise DataError("features must be finite")
    if not np.isin(labels, (SECURE, INSECURE)).all():
        raise DataError("labels must be 0 (secure) or 1 (insecure)")
    if feature_order is None:
        width = features.shape[1]
        feature_order = (
            FEATURE_ORDER if width == len(FEATURE_ORDER)
            else tuple("x{}".format(i) for i in range(width))
        )

    if len(features) >= 2:
        stats, z = standardize(features)
    else:
        stats = Standardization(
            mean=features[0].tolist(), std=[1.0] * features.shape[1]
        )
        z = stats.transform(features)

    nodes: List[Node] = []

    def grow(rows: np.ndarray, node_id: int, depth: int):
        y = labels[rows]
        leaf = _leaf(node_id, y, depth)
        if (
            depth >= config.max_depth
            or leaf.purity >= config.purity_stop
            or len(rows) < config.min_samples
        ):
            nodes.append(leaf)
            return
        rng = np.random.default_rng(derive_seed(config.seed, "node", node_id))
        result = optimize_split(z[rows], y, config, rng)
        coeffs = np.array(result.coeffs)
        goes_right = route_right(coeffs, z[rows])
        axis = axis_aligned_start(z[rows], y)
        if axis is not None:
            axis_right = route_right(axis, z[rows])
            if hard_entropy(axis_right, y) < hard_entropy(goes_right, y):
                LOGGER.debug("Node %d keeps the axis-aligned split", node_id)
                coeffs, goes_right = axis, axis_right
        if goes_right.all() or not goes_right.any():
            LOGGER.debug("Node %d split leaves a child empty; making a leaf", node_id)
            nodes.append(leaf)
            return
        left_id, right_id = 2 * node_id + 1, 2 * node_id + 2
        nodes.append(
            SplitNode(node_id=node_id, coeffs=list(coeffs), left=left_id, right=right_id)
        )
        grow(rows[~goes_right], left_id, depth + 1)
        grow(rows[goes_right], right_id, depth + 1)

    grow(np.arange(len(labels)), 0, 0)
    nodes.sort(key=lambda node: node.node_id)
    depth = max(node.depth for node in nodes if isinstance(node, LeafNode))
    tree = ObliqueTree(
        feature_order=tuple(feature_order),
        stats=stats,
        train_config=config,
        depth=depth,
        nodes=nodes,
    )
    LOGGER.info(
        "Fitted tree of depth %d with %d leaves on %d rows",
        depth,
        len(tree.leaves),
        len(labels),
    )
    return tree


def fit_dataset(dataset: Dataset, config: Optional[WodtConfig] = None) -> ObliqueTree:
    """Fit on a generated dataset."""
    return fit(dataset.features, dataset.labels, config)


def _as_row(x: Union[FeatureVector, Sequence[float]]) -> np.ndarray:
    row = x.as_array() if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
    if not np.all(np.isfinite(row)):
        raise DataError("cannot classify non-finite features {}".format(row.tolist()))
    return row


def predict(tree: ObliqueTree, x: Union[FeatureVector, Sequence[float]]) -> int:
    """Label of the leaf x descends to."""
    z = tree.stats.transform(_as_row(x))
    nodes = tree.node_map
    node = nodes[0]
    while isinstance(node, SplitNode):
        node = nodes[node.right if route_right(node.coeffs, z)[0] else node.left]
    return node.label


def predict_many(tree: ObliqueTree, features: np.ndarray) -> np.ndarray:
    """Vectorized predict over rows."""
    features = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(features)):
        raise DataError("cannot classify non-finite features")
    z = tree.stats.transform(features)
    nodes = tree.node_map
    current = np.zeros(len(z), dtype=int)
    labels = np.full(len(z), -1)
    pending = np.ones(len(z), dtype=bool)
    while pending.any():
        for node_id in np.unique(current[pending]):
            node = nodes[int(node_id)]
            rows = pending & (current == node_id)
            if isinstance(node, LeafNode):
                labels[rows] = node.label
                pending[rows] = False
            else:
                right = route_right(node.coeffs, z[rows])
                current[np.flatnonzero(rows)] = np.where(right, node.right, node.left)
    return labels


def _paths(tree: ObliqueTree) -> Dict[int, List[Tuple[SplitNode, bool]]]:
    nodes = tree.node_map
    paths: Dict[int, List[Tuple[SplitNode, bool]]] = {}
    stack = [(0, [])]
    while stack:
        node_id, path = stack.pop()
        node = nodes[node_id]
        if isinstance(node, LeafNode):
            paths[node_id] = path
        else:
            stack.append((node.left, path + [(node, False)]))
            stack.append((node.right, path + [(node, True)]))
    return paths


def extract_secure_regions(tree: ObliqueTree) -> List[SecureRegion]:
    """One polytope per secure leaf, left branches sign-flipped.

    Routing sends points on a split hyperplane right, while the regions are
    closed: a point on the hyperplane satisfies the rows of both children.
    Membership and prediction therefore agree everywhere off the split
    hyperplanes, and a secure left leaf also admits its boundary.
    """
    mean = np.array(tree.stats.mean)
    std = np.array(tree.stats.std)
    regions = []
    for leaf_id, path in sorted(_paths(tree).items()):
        if tree.node_map[leaf_id].label != SECURE:
            continue
        coeffs, bias = [], []
        for node, right in path:
            sign = 1.0 if right else -1.0
            weights = sign * np.array(node.coeffs[:-1])
            coeffs.append((weights / std).tolist())
            bias.append(float(sign * node.coeffs[-1] - np.sum(weights * mean / std)))
        regions.append(SecureRegion(leaf_id=leaf_id, coeffs=coeffs, bias=bias))
    if not regions:
        LOGGER.warning("Tree has no secure leaf; no secure region to extract")
    return regions


def evaluate(tree: ObliqueTree, features: np.ndarray, labels: np.ndarray) -> Evaluation:
    """Accuracy and error kinds."""
    labels = np.asarray(labels, dtype=int)
    predicted = predict_many(tree, features)
    matrix = confusion_matrix(labels, predicted, labels=[SECURE, INSECURE])
    return Evaluation(
        samples=len(labels),
        accuracy=float(accuracy_score(labels, predicted)) if len(labels) else 0.0,
        false_secure=int(matrix[INSECURE, SECURE]),
        false_insecure=int(matrix[SECURE, INSECURE]),
    )


def accuracy(tree: ObliqueTree, features: np.ndarray, labels: np.ndarray) -> float:
    """Share of rows classified correctly."""
    return evaluate(tree, features, labels).accuracy


def axis_aligned_baseline(
    features: np.ndarray, labels: np.ndarray, depth: int, seed: int = 0
) -> DecisionTreeClassifier:
    """Entropy CART of the same depth."""
    model = DecisionTreeClassifier(
        criterion="entropy", max_depth=max(depth, 1), random_state=seed
    )
    return model.fit(features, labels)


def depth_sweep(
    dataset: Dataset,
    depths: Sequence[int] = (1, 2, 3, 4, 5, 6),
    config: Optional[WodtConfig] = None,
    test: Optional[Dataset] = None,
) -> List[DepthReport]:
    """Train oblique and axis-aligned trees at each depth and compare."""
    config = config or WodtConfig()
    reports = []
    for depth in depths:
        tree = fit_dataset(dataset, config.copy(update={"max_depth": depth}))
        cart = axis_aligned_baseline(dataset.features, dataset.labels, depth, config.seed)
        report = {
            "depth": depth,
            "wodt_accuracy": accuracy(tree, dataset.features, dataset.labels),
            "cart_accuracy": float(cart.score(dataset.features, dataset.labels)),
            "leaves": len(tree.leaves),
            "secure_regions": len(extract_secure_regions(tree)),
        }
        if test is not None and len(test):
            report["wodt_test_accuracy"] = accuracy(tree, test.features, test.labels)
            report["cart_test_accuracy"] = float(cart.score(test.features, test.labels))
        reports.append(DepthReport(**report))
        LOGGER.info(
            "Depth %d: oblique %.4f, axis-aligned %.4f",
            depth,
            report["wodt_accuracy"],
            report["cart_accuracy"],
        )
    return reports


def write_regions(regions: Sequence[SecureRegion], path: Union[str, Path]) -> Path:
    """CSV of (leaf_id, row_idx, coefficients, bias) in original units."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [
        dict(
            leaf_id=region.leaf_id,
            row_idx=index,
            **dict(zip(FEATURE_ORDER, row)),
            bias=bias,
        )
        for region in regions
        for index, (row, bias) in enumerate(zip(region.coeffs, region.bias))
    ]
    frame = pd.DataFrame(
        records, columns=["leaf_id", "row_idx", *FEATURE_ORDER, "bias"]
    )
    with path.open("w", newline="") as stream:
        # leaves without rows (unconstrained regions) only appear here
        stream.write(
            "# leaf_ids={}\n".format(",".join(str(region.leaf_id) for region in regions))
        )
        frame.to_csv(stream, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_regions(path: Union[str, Path]) -> List[SecureRegion]:
    """Inverse of write_regions."""
    path = Path(path)
    try:
        with path.open() as stream:
            first = stream.readline()
    except FileNotFoundError as err:
        raise DataError("File not found: {}".format(path)) from err
    if not first.startswith("# leaf_ids="):
        raise DataError("Missing leaf_ids header in {}".format(path))
    ids = [int(value) for value in first.split("=", 1)[1].strip().split(",") if value]
    frame = pd.read_csv(path, comment="#")
    missing = {"leaf_id", "row_idx", "bias", *FEATURE_ORDER} - set(frame.columns)
    if missing:
        raise DataError("Region file {} lacks columns {}".format(path, sorted(missing)))
    regions = []
    for leaf_id in ids:
        rows = frame[frame["leaf_id"] == leaf_id].sort_values("row_idx")
        regions.append(
            SecureRegion(
                leaf_id=leaf_id,
                coeffs=rows[list(FEATURE_ORDER)].to_numpy().tolist(),
                bias=rows["bias"].tolist(),
            )
        )
    return regions


def read_rule_sets(
    path: Union[str, Path], areas: Sequence[str]
) -> Dict[str, List[SecureRegion]]:
    """Secure regions per area.

    A directory holds one ``<area>.csv`` per area; a single file serves every
    area.
    """
    path = Path(path)
    if path.is_dir():
        rules = {}
        for area in areas:
            candidate = path / "{}.csv".format(area)
            if not candidate.exists():
                raise DataError("No region file for area {} in {}".format(area, path))
            rules[area] = read_regions(candidate)
        return rules
    regions = read_regions(path)
    return {area: list(regions) for area in areas}
