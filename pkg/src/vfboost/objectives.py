"""Objective measurements: utility loss, HE training cost, privacy leakage.

Utility is AUC for binary tasks and plain accuracy for multiclass tasks;
utility loss is its complement. Training cost prices the HE operation
counters with a per-operation cost model. Privacy leakage is produced by
the attack module and only aggregated here. The Evaluator wraps one full
training run per hyperparameter vector and memoizes results so duplicate
genomes are never re-trained.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .boosting import LOSS_LOGISTIC, Forest, predict
from .errors import MetricError, ParameterError, VFBoostError
from .he import HECostModel, HECounters


@dataclass(frozen=True)
class ObjectiveVector:
    """(utility loss, training cost in seconds, privacy leakage)."""

    utility_loss: float
    cost_seconds: float
    privacy_leakage: float

    def __post_init__(self):
        values = (self.utility_loss, self.cost_seconds, self.privacy_leakage)
        if not all(np.isfinite(values)):
            raise ParameterError(f"objectives must be finite, got {values}")
        if not 0.0 <= self.utility_loss <= 1.0:
            raise ParameterError(f"utility loss out of [0, 1]: {self.utility_loss}")
        if not 0.0 <= self.privacy_leakage <= 1.0:
            raise ParameterError(
                f"privacy leakage out of [0, 1]: {self.privacy_leakage}"
            )
        if self.cost_seconds < 0.0:
            raise ParameterError(f"cost must be >= 0: {self.cost_seconds}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.utility_loss, self.cost_seconds, self.privacy_leakage]
        )


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability that a random positive outranks a random negative.

    Ties count one half (the Mann-Whitney convention).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise ParameterError("scores and labels must have the same length")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if len(predicted) != len(labels):
        raise ParameterError("predictions and labels must have the same length")
    if len(labels) == 0:
        raise MetricError("accuracy of an empty set is undefined")
    return float(np.mean(predicted == labels))


def utility_loss(forest: Forest, features: np.ndarray, labels: np.ndarray) -> float:
    """1 - U(model, test data), with U = AUC (binary) or accuracy."""
    if len(features) == 0:
        raise ParameterError("test set is empty")
    scores = predict(forest, features)
    if forest.loss == LOSS_LOGISTIC:
        return 1.0 - auc(scores, labels)
    return 1.0 - accuracy(np.argmax(scores, axis=1), labels)


def training_cost(counters: HECounters, cost_model: HECostModel) -> float:
    """Total seconds spent on HE operations under the cost model."""
    return cost_model.seconds(counters)


def derive_evaluation_seed(base_seed: int, key: tuple) -> int:
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "big")) & (2**63 - 1)


class Evaluator:
    """Memoizing bridge from decoded hyperparameters to objective values.

    Each distinct configuration is trained once with a seed derived from
    the experiment seed and the configuration itself, so campaigns are
    reproducible end to end. Training failures yield the configured upper
    bound objectives instead of aborting the caller's search loop.
    """

    def __init__(
        self,
        dataset,
        partition,
        split,
        probe,
        cost_model: HECostModel | None = None,
        base_seed: int = 0,
        backend_factory=None,
        upper_bounds: tuple = (1.0, 100.0, 1.0),
        known_per_class: int = 1,
        bin_count: int = 32,
    ):
        self.dataset = dataset
        self.partition = partition
        self.split = split
        self.probe = probe
        self.cost_model = cost_model or HECostModel()
        self.base_seed = base_seed
        self.backend_factory = backend_factory
        self.upper_bounds = upper_bounds
        self.known_per_class = known_per_class
        self.bin_count = bin_count
        self.cache: dict = {}
        self.evaluations = 0
        self.failures = 0

    def __call__(self, config) -> ObjectiveVector:
        key = config.key()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        from . import fedproto

        seed = derive_evaluation_seed(self.base_seed, key)
        backend = self.backend_factory() if self.backend_factory else None
        self.evaluations += 1
        try:
            result = fedproto.sbo_train(
                config,
                self.dataset,
                self.partition,
                self.split,
                self.probe,
                cost_model=self.cost_model,
                backend=backend,
                seed=seed,
                known_per_class=self.known_per_class,
                bin_count=self.bin_count,
            )
            vector = result.objectives
        except VFBoostError:
            self.failures += 1
            vector = ObjectiveVector(*self.upper_bounds)
        self.cache[key] = vector
        return vector
