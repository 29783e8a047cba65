"""Instance clustering attack on the passive party's leaf view.

The attacker sees, for every federated tree, which training instances
landed together in leaves that sit under at least one of its own splits.
Co-location frequency across trees gives a similarity matrix; average
linkage clustering plus a handful of known labels per class turns it
into label predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    cluster_count: int
    degenerate: bool = False


@dataclass
class AttackReport:
    epsilon_p: float
    applicable: bool
    predicted: np.ndarray | None = None
    cluster_sizes: list = field(default_factory=list)
    confusion: np.ndarray | None = None
    degenerate: bool = False


def build_similarity(log, probe: np.ndarray) -> np.ndarray:
    """Fraction of federated trees in which two probe instances share a leaf.

    The diagonal entry is the fraction of trees in which the instance
    appears in any logged leaf at all.
    """
    if log.n_slots == 0:
        raise ParameterError("log covers no federated tree")
    probe = np.asarray(probe)
    n_probe = len(probe)
    position = {int(inst): i for i, inst in enumerate(probe)}
    sim = np.zeros((n_probe, n_probe))
    for slot in range(log.n_slots):
        leaf_of = np.full(n_probe, -1, dtype=np.int64)
        for leaf_id, members in log.slot_entries(slot):
            for inst in members:
                pos = position.get(int(inst))
                if pos is not None:
                    leaf_of[pos] = leaf_id
        present = leaf_of >= 0
        same = (leaf_of[:, None] == leaf_of[None, :]) & present[:, None] & present[None, :]
        sim += same
    return sim / log.n_slots


def cluster_instances(similarity: np.ndarray, cluster_count: int) -> ClusterAssignment:
    """Average-linkage agglomerative clustering on distance 1 - S.

    Clusters are merged bottom-up until ``cluster_count`` remain. Ties on
    the merge distance prefer the smaller resulting cluster, then the
    lowest instance index; never-co-located instances therefore attach to
    existing clusters instead of forcing two informative clusters
    together. An all-zero similarity matrix carries no information at
    all; instances are then assigned to contiguous index blocks and
    flagged degenerate.
    """
    n = len(similarity)
    if cluster_count < 2 or cluster_count > n:
        raise ParameterError(
            f"cluster count must be in [2, {n}], got {cluster_count}"
        )
    off_diag = similarity - np.diag(np.diag(similarity))
    if not np.any(off_diag):
        labels = np.zeros(n, dtype=np.int64)
        for cid, block in enumerate(np.array_split(np.arange(n), cluster_count)):
            labels[block] = cid
        return ClusterAssignment(labels, cluster_count, degenerate=True)

    # Lance-Williams update over a full distance matrix. Clusters live in
    # the slot of their lowest member, so candidate pairs (i, j) with
    # i < j are ordered by lowest instance index.
    dist = 1.0 - similarity.astype(np.float64)
    np.fill_diagonal(dist, np.inf)
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    for _ in range(n - cluster_count):
        lowest = dist.min()
        rows, cols = np.nonzero(dist == lowest)
        upper = rows < cols
        rows, cols = rows[upper], cols[upper]
        order = np.lexsort((cols, rows, sizes[rows] + sizes[cols]))
        i, j = int(rows[order[0]]), int(cols[order[0]])
        keep = active.copy()
        keep[i] = keep[j] = False
        merged = (sizes[i] * dist[i, keep] + sizes[j] * dist[j, keep]) / (
            sizes[i] + sizes[j]
        )
        dist[i, keep] = merged
        dist[keep, i] = merged
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        sizes[i] += sizes[j]
        members[i].extend(members[j])
        members[j] = []
        active[j] = False

    labels = np.empty(n, dtype=np.int64)
    for cid, slot in enumerate(np.flatnonzero(active)):
        labels[members[slot]] = cid
    return ClusterAssignment(labels, cluster_count)


def infer_labels(
    assignment: ClusterAssignment,
    similarity: np.ndarray,
    knowledge: dict,
) -> np.ndarray:
    """Spread known labels through the clusters.

    ``knowledge`` maps a class id to probe positions with known labels.
    Each cluster takes the majority class of its known members (ties go
    to the lowest class id); a cluster with no known member inherits the
    label of the nearest labelled cluster under mean 1 - S distance.
    """
    if not knowledge or any(len(v) == 0 for v in knowledge.values()):
        raise ParameterError("need at least one known instance per class")
    n = len(assignment.labels)
    c = assignment.cluster_count
    votes = np.zeros((c, max(knowledge) + 1), dtype=np.int64)
    for cls, positions in knowledge.items():
        for pos in positions:
            votes[assignment.labels[pos], cls] += 1

    cluster_label = np.full(c, -1, dtype=np.int64)
    labelled = votes.sum(axis=1) > 0
    cluster_label[labelled] = np.argmax(votes[labelled], axis=1)

    if not labelled.all():
        dist = 1.0 - similarity
        for cid in np.flatnonzero(~labelled):
            mine = assignment.labels == cid
            best, best_d = -1, np.inf
            for other in np.flatnonzero(labelled):
                theirs = assignment.labels == other
                d = float(dist[np.ix_(mine, theirs)].mean())
                if d < best_d:
                    best, best_d = other, d
            cluster_label[cid] = cluster_label[best]

    predicted = cluster_label[assignment.labels]
    return predicted


def attack_accuracy(predicted: np.ndarray, true_labels: np.ndarray) -> float:
    """Fraction of probe instances whose inferred label is correct."""
    predicted = np.asarray(predicted)
    true_labels = np.asarray(true_labels)
    if len(predicted) != len(true_labels):
        raise ParameterError("prediction and label lengths differ")
    return float(np.mean(predicted == true_labels))


def run_attack(
    log,
    probe: np.ndarray,
    labels: np.ndarray,
    knowledge: dict,
    class_count: int,
) -> AttackReport:
    """Full attack pipeline; chance-level report when the log is empty.

    ``knowledge`` maps class ids to absolute instance indices inside the
    probe set; ``labels`` is the full label vector indexed by absolute
    instance id.
    """
    probe = np.asarray(probe)
    if log.entry_count == 0:
        return AttackReport(epsilon_p=1.0 / class_count, applicable=False)
    position = {int(inst): i for i, inst in enumerate(probe)}
    known_positions = {}
    for cls, instances in knowledge.items():
        for inst in instances:
            if int(inst) not in position:
                raise ParameterError(
                    f"known instance {inst} is not part of the probe set"
                )
        known_positions[cls] = [position[int(i)] for i in instances]

    similarity = build_similarity(log, probe)
    assignment = cluster_instances(similarity, class_count)
    predicted = infer_labels(assignment, similarity, known_positions)
    truth = labels[probe]
    confusion = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    sizes = np.bincount(assignment.labels, minlength=class_count).tolist()
    return AttackReport(
        epsilon_p=attack_accuracy(predicted, truth),
        applicable=True,
        predicted=predicted,
        cluster_sizes=sizes,
        confusion=confusion,
        degenerate=assignment.degenerate,
    )
