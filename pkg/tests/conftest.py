import numpy as np
import pytest

import vfboost as vb


@pytest.fixture(scope="session")
def synthetic1():
    return vb.generate_synthetic(2000, 5, 5, 2, 1.0, seed=7)


@pytest.fixture(scope="session")
def synthetic1_context(synthetic1):
    """Partition, split, and balanced probe for the stock binary dataset."""
    partition = vb.vertical_partition(synthetic1, 5)
    split = vb.train_test_split(synthetic1, seed=7)
    train_labels = synthetic1.labels[split.train_rows]
    probe = split.train_rows[vb.sample_balanced(train_labels, 50, seed=7)]
    return synthetic1, partition, split, probe


@pytest.fixture(scope="session")
def small_context():
    """A 300-row binary dataset for fast protocol tests."""
    dataset = vb.generate_synthetic(300, 3, 3, 2, 2.0, seed=5)
    partition = vb.vertical_partition(dataset, 3)
    split = vb.train_test_split(dataset, seed=5)
    train_labels = dataset.labels[split.train_rows]
    probe = split.train_rows[vb.sample_balanced(train_labels, 30, seed=5)]
    return dataset, partition, split, probe


def leakage_run(dataset, seed, **config_kwargs):
    """One training run on a freshly derived partition/split/probe."""
    params = dict(n_f=5, n_l=0, d=4, r=1.0, p=vb.PURITY_OFF, eta=0.3)
    params.update(config_kwargs)
    partition = vb.vertical_partition(dataset, dataset.n_columns // 2)
    split = vb.train_test_split(dataset, seed=seed)
    train_labels = dataset.labels[split.train_rows]
    per_class = min(50, int(np.bincount(train_labels).min()))
    probe = split.train_rows[vb.sample_balanced(train_labels, per_class, seed=seed)]
    return vb.sbo_train(
        vb.TrainingConfig(**params),
        dataset,
        partition,
        split,
        probe,
        seed=seed,
        known_per_class=5,
    )
