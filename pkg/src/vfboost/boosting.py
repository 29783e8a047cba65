"""Histogram-based gradient boosted tree core.

Plaintext building blocks shared by the active party's local trees, the
locally grown subtrees of the purity defense, and the federated split
protocol: second-order gradients, quantile binning, per-bin gradient
statistics, split gain, recursive tree growth, and prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

DEFAULT_BIN_COUNT = 32
DEFAULT_LAMBDA = 1.0
DEFAULT_GAMMA = 0.0
DEFAULT_MIN_CHILD_WEIGHT = 1e-3

OWNER_ACTIVE = "active"
OWNER_PASSIVE = "passive"
OWNER_LOCAL = "local"

LOSS_LOGISTIC = "logistic"
LOSS_SOFTMAX = "softmax"


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def compute_gradients(labels, raw_scores, loss):
    """First and second order gradients of the loss at the current scores.

    Logistic loss expects scores of shape (n,) and returns g, h of shape
    (n,). Softmax expects (n, C) and returns (n, C), one column per class
    slot.
    """
    labels = np.asarray(labels)
    raw_scores = np.asarray(raw_scores, dtype=np.float64)
    if len(labels) != len(raw_scores):
        raise ParameterError("labels and scores must have the same length")
    if loss == LOSS_LOGISTIC:
        if raw_scores.ndim != 1:
            raise ParameterError("logistic loss expects 1-D scores")
        prob = sigmoid(raw_scores)
        return prob - labels, prob * (1.0 - prob)
    if loss == LOSS_SOFTMAX:
        if raw_scores.ndim != 2:
            raise ParameterError("softmax loss expects 2-D scores")
        prob = softmax(raw_scores)
        onehot = np.zeros_like(prob)
        onehot[np.arange(len(labels)), labels] = 1.0
        return prob - onehot, prob * (1.0 - prob)
    raise ParameterError(f"unknown loss {loss!r}")


@dataclass(frozen=True)
class Binning:
    """Per-feature quantile cut values.

    ``edges[f]`` is strictly increasing and every edge separates at least
    one training value from another, so a constant feature has no edges
    and exactly one bin. A value v falls in the bin counting the edges
    that are <= v; equivalently, the split "bin <= b" routes exactly the
    values v < edges[f][b] to the left child.
    """

    edges: list = field(default_factory=list)

    def n_bins(self, feature: int) -> int:
        return len(self.edges[feature]) + 1

    def bin_column(self, values: np.ndarray, feature: int) -> np.ndarray:
        return np.searchsorted(self.edges[feature], values, side="right").astype(
            np.int32
        )

    def bin_matrix(self, features: np.ndarray) -> np.ndarray:
        out = np.empty(features.shape, dtype=np.int32)
        for f in range(features.shape[1]):
            out[:, f] = self.bin_column(features[:, f], f)
        return out


def quantile_binning(train_features: np.ndarray, bin_count: int = DEFAULT_BIN_COUNT) -> Binning:
    """Cut each feature at its empirical quantiles.

    Duplicate quantiles collapse, so low-cardinality features end up with
    fewer bins; edges that would separate nothing are dropped.
    """
    if bin_count < 2:
        raise ParameterError("bin_count must be >= 2")
    qs = np.arange(1, bin_count) / bin_count
    edges = []
    for f in range(train_features.shape[1]):
        col = train_features[:, f]
        cand = np.unique(np.quantile(col, qs))
        lo, hi = col.min(), col.max()
        cand = cand[(cand > lo) & (cand <= hi)]
        edges.append(cand)
    return Binning(edges=edges)


def build_histogram(bins_column, instances, g, h, n_bins):
    """Accumulate (sum g, sum h, count) per bin over an instance set."""
    b = bins_column[instances]
    sum_g = np.bincount(b, weights=g[instances], minlength=n_bins)
    sum_h = np.bincount(b, weights=h[instances], minlength=n_bins)
    count = np.bincount(b, minlength=n_bins)
    return sum_g, sum_h, count


def split_gain(gl, hl, gr, hr, lam, gamma):
    total_g = gl + gr
    total_h = hl + hr
    return 0.5 * (
        gl * gl / (hl + lam) + gr * gr / (hr + lam) - total_g * total_g / (total_h + lam)
    ) - gamma


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    bin: int
    gain: float


def scan_histogram(sum_g, sum_h, lam, gamma, min_child_weight):
    """Best cut of a single feature histogram, or None.

    Cut b sends bins <= b left. The first maximal-gain bin wins, which
    realises the lowest-bin tie-break.
    """
    if len(sum_g) < 2:
        return None
    gl = np.cumsum(sum_g)[:-1]
    hl = np.cumsum(sum_h)[:-1]
    gr = sum_g.sum() - gl
    hr = sum_h.sum() - hl
    gains = split_gain(gl, hl, gr, hr, lam, gamma)
    gains[(hl < min_child_weight) | (hr < min_child_weight)] = -np.inf
    b = int(np.argmax(gains))
    if not np.isfinite(gains[b]) or gains[b] <= 0.0:
        return None
    return int(b), float(gains[b])


def find_best_split(
    histograms: dict,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    min_child_weight: float = DEFAULT_MIN_CHILD_WEIGHT,
) -> SplitChoice | None:
    """Highest-gain (feature, bin) cut over per-feature histograms.

    ``histograms`` maps a feature index to its (sum_g, sum_h) arrays.
    Ties break toward the lower feature index, then the lower bin; a cut
    is only returned when its gain is strictly positive and both children
    carry at least ``min_child_weight`` hessian mass.
    """
    if not histograms:
        raise ParameterError("no histograms to scan")
    best = None
    for feature in sorted(histograms):
        sum_g, sum_h = histograms[feature][:2]
        found = scan_histogram(sum_g, sum_h, lam, gamma, min_child_weight)
        if found is None:
            continue
        b, gain = found
        if best is None or gain > best.gain:
            best = SplitChoice(feature=feature, bin=b, gain=gain)
    return best


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    bin: int = -1
    left: int = -1
    right: int = -1
    weight: float = 0.0
    owner: str = OWNER_LOCAL

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class DecisionTree:
    """Binary tree over global feature columns.

    ``kind`` records whether the tree was grown during the local-only
    stage or during a federated round; node owner tags record which party
    chose each split.
    """

    nodes: list
    kind: str = "local"
    class_slot: int = 0

    def leaf_values(self, features: np.ndarray) -> np.ndarray:
        out = np.empty(len(features), dtype=np.float64)
        stack = [(0, np.arange(len(features)))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node.weight
                continue
            goes_left = features[rows, node.feature] < node.threshold
            stack.append((node.left, rows[goes_left]))
            stack.append((node.right, rows[~goes_left]))
        return out

    def max_depth(self) -> int:
        depth = {0: 0}
        best = 0
        for i, node in enumerate(self.nodes):
            if not node.is_leaf:
                depth[node.left] = depth[i] + 1
                depth[node.right] = depth[i] + 1
                best = max(best, depth[i] + 1)
        return best


@dataclass
class Forest:
    """Ordered boosted ensemble; C trees per round for multiclass."""

    trees: list
    learning_rate: float
    loss: str
    class_count: int
    feature_count: int

    def score_shape(self, n_rows):
        if self.loss == LOSS_LOGISTIC:
            return (n_rows,)
        return (n_rows, self.class_count)


def grow_tree(
    binning: Binning,
    bin_matrix: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    columns,
    max_depth: int,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    min_child_weight: float = DEFAULT_MIN_CHILD_WEIGHT,
    instances: np.ndarray | None = None,
    owner: str = OWNER_LOCAL,
    kind: str = "local",
    class_slot: int = 0,
) -> DecisionTree:
    """Grow one tree depth-first (left child first) over the given columns.

    ``bin_matrix`` rows are aligned with g and h; ``instances`` restricts
    the root instance set. Leaf weight is -G / (H + lam).
    """
    if instances is None:
        instances = np.arange(len(g))
    if len(instances) == 0:
        raise ParameterError("instance set is empty")
    columns = list(columns)
    nodes: list[TreeNode] = [TreeNode()]

    def settle_leaf(node_id, rows):
        total_g = g[rows].sum()
        total_h = h[rows].sum()
        nodes[node_id] = TreeNode(weight=-total_g / (total_h + lam), owner=owner)

    def expand(node_id, rows, depth):
        if depth >= max_depth:
            settle_leaf(node_id, rows)
            return
        hists = {
            col: build_histogram(bin_matrix[:, col], rows, g, h, binning.n_bins(col))
            for col in columns
        }
        choice = find_best_split(hists, lam, gamma, min_child_weight)
        if choice is None:
            settle_leaf(node_id, rows)
            return
        goes_left = bin_matrix[rows, choice.feature] <= choice.bin
        left_id = len(nodes)
        nodes.append(TreeNode())
        right_id = len(nodes)
        nodes.append(TreeNode())
        nodes[node_id] = TreeNode(
            feature=choice.feature,
            threshold=float(binning.edges[choice.feature][choice.bin]),
            bin=choice.bin,
            left=left_id,
            right=right_id,
            owner=owner,
        )
        expand(left_id, rows[goes_left], depth + 1)
        expand(right_id, rows[~goes_left], depth + 1)

    expand(0, np.asarray(instances), 0)
    return DecisionTree(nodes=nodes, kind=kind, class_slot=class_slot)


def train_local_tree(
    features: np.ndarray,
    instances,
    g,
    h,
    columns,
    max_depth: int,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    min_child_weight: float = DEFAULT_MIN_CHILD_WEIGHT,
    bin_count: int = DEFAULT_BIN_COUNT,
) -> DecisionTree:
    """Bin the view and grow a single plaintext tree on its own columns."""
    binning = quantile_binning(features, bin_count)
    bins = binning.bin_matrix(features)
    return grow_tree(
        binning,
        bins,
        np.asarray(g, dtype=np.float64),
        np.asarray(h, dtype=np.float64),
        columns,
        max_depth,
        lam,
        gamma,
        min_child_weight,
        instances=np.asarray(instances),
    )


def predict(forest: Forest, features: np.ndarray) -> np.ndarray:
    """Raw additive scores: (n,) for logistic, (n, C) for softmax."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != forest.feature_count:
        raise ParameterError(
            f"expected {forest.feature_count} feature columns, "
            f"got shape {features.shape}"
        )
    scores = np.zeros(forest.score_shape(len(features)))
    for tree in forest.trees:
        contribution = forest.learning_rate * tree.leaf_values(features)
        if forest.loss == LOSS_LOGISTIC:
            scores += contribution
        else:
            scores[:, tree.class_slot] += contribution
    return scores


def train_plaintext_forest(
    features: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    rounds: int,
    max_depth: int,
    eta: float = 0.3,
    columns=None,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    bin_count: int = DEFAULT_BIN_COUNT,
) -> Forest:
    """Centralized boosting on one feature matrix, used as a baseline."""
    loss = LOSS_LOGISTIC if class_count == 2 else LOSS_SOFTMAX
    if columns is None:
        columns = range(features.shape[1])
    binning = quantile_binning(features, bin_count)
    bins = binning.bin_matrix(features)
    forest = Forest(
        trees=[],
        learning_rate=eta,
        loss=loss,
        class_count=class_count,
        feature_count=features.shape[1],
    )
    scores = np.zeros(forest.score_shape(len(features)))
    slots = 1 if loss == LOSS_LOGISTIC else class_count
    for _ in range(rounds):
        g, h = compute_gradients(labels, scores, loss)
        for k in range(slots):
            gk = g if loss == LOSS_LOGISTIC else g[:, k]
            hk = h if loss == LOSS_LOGISTIC else h[:, k]
            tree = grow_tree(
                binning, bins, gk, hk, columns, max_depth, lam, gamma,
                class_slot=k,
            )
            update = eta * tree.leaf_values(features)
            if loss == LOSS_LOGISTIC:
                scores += update
            else:
                scores[:, k] += update
            forest.trees.append(tree)
    return forest
