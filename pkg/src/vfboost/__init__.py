"""Vertical federated gradient boosting with privacy and cost tradeoffs.

Library layout:

* ``data``: synthetic generation, CSV ingestion, partitioning, splits
* ``boosting``: plaintext histogram GBDT core
* ``he``: counting and Paillier encryption backends, cost accounting
* ``fedproto``: the two-party training protocol and its defenses
* ``attack``: leaf co-location clustering label inference
* ``objectives``: utility loss, training cost, leakage aggregation
* ``moo``: constrained NSGA-II, hypervolume, genome codec
* ``experiment`` / ``cli``: configuration, campaigns, artifacts
"""

from .data import (
    Dataset,
    SplitIndices,
    VerticalPartition,
    generate_synthetic,
    load_csv,
    sample_balanced,
    train_test_split,
    vertical_partition,
)
from .fedproto import (
    PURITY_OFF,
    LeafAssignmentLog,
    SBOResult,
    TrainingConfig,
    node_purity,
    sbo_train,
    split_finding,
)
from .he import CountingBackend, HECostModel, HECounters, PaillierBackend
from .moo import Chromosome, Constraints, GAConfig, decode, hypervolume, run_cmosb
from .objectives import Evaluator, ObjectiveVector, auc, training_cost, utility_loss

__version__ = "0.1.0"

__all__ = [
    "Chromosome",
    "Constraints",
    "CountingBackend",
    "Dataset",
    "Evaluator",
    "GAConfig",
    "HECostModel",
    "HECounters",
    "LeafAssignmentLog",
    "ObjectiveVector",
    "PaillierBackend",
    "PURITY_OFF",
    "SBOResult",
    "SplitIndices",
    "TrainingConfig",
    "VerticalPartition",
    "auc",
    "decode",
    "generate_synthetic",
    "hypervolume",
    "load_csv",
    "node_purity",
    "run_cmosb",
    "sample_balanced",
    "sbo_train",
    "split_finding",
    "train_test_split",
    "training_cost",
    "utility_loss",
    "vertical_partition",
]
