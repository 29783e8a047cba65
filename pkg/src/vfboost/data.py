"""Dataset generation, CSV ingestion, vertical partitioning, and splits.

The conventions used everywhere downstream:

* a dataset is a dense float feature matrix plus an integer label vector,
* labels are contiguous in ``[0, class_count)``,
* the active party owns the labels and a prefix of the feature columns,
  the passive party owns the remaining columns,
* every random choice is driven by an explicit unsigned seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import IngestionError, ParameterError, SamplingError

_SUBSEED_SYNTH = 0x5D
_SUBSEED_SPLIT = 0x51
_SUBSEED_SAMPLE = 0x5A


@dataclass(frozen=True)
class Dataset:
    """A labelled dataset with provenance seed."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    seed: int = 0

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ParameterError("features must be a 2-D array")
        if len(self.features) != len(self.labels):
            raise ParameterError(
                f"feature rows ({len(self.features)}) != labels ({len(self.labels)})"
            )
        if self.class_count < 2:
            raise ParameterError("class_count must be at least 2")
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.class_count
        ):
            raise ParameterError("labels must lie in [0, class_count)")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_columns(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class VerticalPartition:
    """Disjoint column ownership for the two parties."""

    active_columns: np.ndarray
    passive_columns: np.ndarray

    def __post_init__(self):
        if len(self.active_columns) == 0 or len(self.passive_columns) == 0:
            raise ParameterError("both parties need at least one column")
        merged = np.concatenate([self.active_columns, self.passive_columns])
        if len(np.unique(merged)) != len(merged):
            raise ParameterError("active and passive columns overlap")

    @property
    def n_columns(self) -> int:
        return len(self.active_columns) + len(self.passive_columns)


@dataclass(frozen=True)
class SplitIndices:
    """Row indices of the train/test split."""

    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int


def generate_synthetic(
    n: int,
    f_active: int,
    f_passive: int,
    c: int,
    class_sep: float = 1.0,
    seed: int = 0,
    informative: int | None = None,
    label_noise: float = 0.0,
) -> Dataset:
    """Generate an n-row classification dataset with c classes.

    Class centroids sit on distinct vertices of the {-1, +1}^k hypercube
    scaled by ``class_sep``, where k = ``informative`` (all columns by
    default); each instance is its centroid plus unit Gaussian noise,
    and the cloud is mixed through a random full-rank linear map onto
    all columns, so every column carries a share of the signal. Class
    sizes are balanced to within one instance before ``label_noise``
    optionally reassigns that fraction of labels uniformly at random.

    A small ``informative`` makes the per-party column views redundant,
    which is the regime where the active party can fit the labels from
    its own columns alone.
    """
    if f_active < 1 or f_passive < 1:
        raise ParameterError("f_active and f_passive must be >= 1")
    if c < 2:
        raise ParameterError("class count must be >= 2")
    if n < 2 * c:
        raise ParameterError(f"need at least {2 * c} instances for {c} classes")
    if class_sep <= 0:
        raise ParameterError("class_sep must be positive")
    if not 0.0 <= label_noise < 1.0:
        raise ParameterError("label_noise must lie in [0, 1)")
    f = f_active + f_passive
    k = f if informative is None else informative
    if not 1 <= k <= f:
        raise ParameterError(f"informative must be in [1, {f}], got {k}")
    if c > 2**k:
        raise ParameterError(f"{c} classes need more than {k} informative columns")

    for attempt in range(64):
        rng = np.random.default_rng([seed, _SUBSEED_SYNTH, attempt])
        centroids = _distinct_vertices(rng, c, k) * class_sep

        counts = np.full(c, n // c)
        counts[: n % c] += 1
        labels = np.repeat(np.arange(c), counts)
        rng.shuffle(labels)

        mixing = rng.normal(size=(k, f))
        if np.linalg.matrix_rank(mixing) < k:
            continue
        raw = centroids[labels] + rng.normal(size=(n, k))
        features = raw @ mixing
        if label_noise > 0.0:
            flip = rng.random(n) < label_noise
            labels[flip] = rng.integers(0, c, size=int(flip.sum()))
        if np.all(np.ptp(features, axis=0) > 0):
            return Dataset(features, labels, class_count=c, seed=seed)
    raise ParameterError("could not generate non-degenerate features")


def _distinct_vertices(rng: np.random.Generator, c: int, f: int) -> np.ndarray:
    """Pick c distinct vertices of {-1, +1}^f."""
    seen: set[bytes] = set()
    vertices = np.empty((c, f))
    k = 0
    while k < c:
        v = rng.integers(0, 2, size=f)
        tag = v.tobytes()
        if tag in seen:
            continue
        seen.add(tag)
        vertices[k] = 2.0 * v - 1.0
        k += 1
    return vertices


def load_csv(path, label_column, c: int) -> Dataset:
    """Load a numeric, header-bearing CSV as a dataset.

    ``label_column`` selects the label column by header name or by
    0-based position. Label values are re-encoded onto [0, c) in sorted
    order. Any missing or non-numeric cell is rejected with its row and
    column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if isinstance(label_column, int):
            if not 0 <= label_column < len(header):
                raise IngestionError(
                    f"{path}: label column index {label_column} out of range"
                )
            label_idx = label_column
        else:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise IngestionError(
                    f"{path}: no column named {label_column!r}"
                ) from None

        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise IngestionError(
                    f"{path}: row {lineno} has {len(cells)} cells, expected {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, cells):
                cell = cell.strip()
                if not cell:
                    raise IngestionError(
                        f"{path}: row {lineno}, column {col!r}: missing value"
                    )
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {lineno}, column {col!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
            rows.append(parsed)

    if not rows:
        raise IngestionError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    raw_labels = table[:, label_idx]
    features = np.delete(table, label_idx, axis=1)
    values = np.unique(raw_labels)
    if len(values) != c:
        raise IngestionError(
            f"{path}: found {len(values)} label values, expected {c} classes"
        )
    labels = np.searchsorted(values, raw_labels).astype(np.int64)
    return Dataset(features, labels, class_count=c)


def vertical_partition(
    dataset: Dataset, active_count: int, seed: int = 0, shuffle: bool = False
) -> VerticalPartition:
    """Assign the first ``active_count`` columns to the active party.

    With ``shuffle=True`` the column order is permuted by ``seed`` before
    the prefix is taken; the default keeps file order so that fixed
    active/passive column counts are reproducible.
    """
    total = dataset.n_columns
    if not 1 <= active_count < total:
        raise ParameterError(
            f"active_count must be in [1, {total - 1}], got {active_count}"
        )
    order = np.arange(total)
    if shuffle:
        order = np.random.default_rng([seed, 0x7A]).permutation(total)
    return VerticalPartition(
        active_columns=np.sort(order[:active_count]),
        passive_columns=np.sort(order[active_count:]),
    )


def train_test_split(dataset: Dataset, seed: int = 0) -> SplitIndices:
    """Shuffle rows by seed and keep floor(2n/3) of them for training."""
    n = dataset.n_rows
    if n == 0:
        raise ParameterError("dataset is empty")
    perm = np.random.default_rng([seed, _SUBSEED_SPLIT]).permutation(n)
    n_train = (2 * n) // 3
    return SplitIndices(
        train_rows=np.sort(perm[:n_train]),
        test_rows=np.sort(perm[n_train:]),
        seed=seed,
    )


def sample_balanced(labels: np.ndarray, per_class: int, seed: int = 0) -> np.ndarray:
    """Sample exactly ``per_class`` indices per class, without replacement."""
    if per_class < 1:
        raise ParameterError("per_class must be >= 1")
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, _SUBSEED_SAMPLE])
    picks = []
    for cls in np.unique(labels):
        pool = np.flatnonzero(labels == cls)
        if len(pool) < per_class:
            raise SamplingError(
                f"class {cls} has {len(pool)} instances, need {per_class}"
            )
        picks.append(rng.choice(pool, size=per_class, replace=False))
    return np.sort(np.concatenate(picks))
