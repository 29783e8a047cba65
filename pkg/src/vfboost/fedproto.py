"""Two-party federated boosting protocol with HE accounting and defenses.

The active party holds labels and its feature columns; the passive party
holds the remaining columns. Gradients travel encrypted: for every node
the passive party folds ciphertext gradients into per-feature histograms
of its own bins, the active party decrypts them, compares against its
plaintext histograms, and announces the winning split. Two defenses
shrink what the passive party learns: a local boosting stage before any
federated round, and a purity threshold that keeps high-purity subtrees
on the active side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attack as attack_mod
from .boosting import (
    DEFAULT_BIN_COUNT,
    DEFAULT_GAMMA,
    DEFAULT_LAMBDA,
    DEFAULT_MIN_CHILD_WEIGHT,
    LOSS_LOGISTIC,
    LOSS_SOFTMAX,
    OWNER_ACTIVE,
    OWNER_LOCAL,
    OWNER_PASSIVE,
    DecisionTree,
    Forest,
    TreeNode,
    build_histogram,
    compute_gradients,
    find_best_split,
    quantile_binning,
)
from .data import Dataset, SplitIndices, VerticalPartition
from .errors import ParameterError
from .he import CountingBackend, HECostModel, HECounters
from .objectives import ObjectiveVector, training_cost, utility_loss

# Setting the purity threshold above 1 makes the purity defense inert,
# which is how undefended baseline configurations are expressed.
PURITY_OFF = 2.0

_SUBSEED_SUBSAMPLE = 0xF5
_SUBSEED_KNOWLEDGE = 0xF7

_MODE_FEDERATED = "federated"
_MODE_LOCAL = "local"
_MODE_ACTIVE_ONLY = "active_only"


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of one federated training run.

    The optimizer decodes genomes into the search ranges (n_f, n_l in
    [1, 16], d in [1, 8], r in [0.1, 1], p in [0.1, 1], eta in
    [0.01, 0.3]); the trainer itself is more permissive so that baseline
    configurations with more rounds, no local stage, or a disabled purity
    defense can be evaluated.
    """

    n_f: int
    n_l: int
    d: int
    r: float
    p: float
    eta: float
    complete_secure: bool = False

    def validate(self) -> None:
        if self.n_f < 1:
            raise ParameterError(f"n_f must be >= 1, got {self.n_f}")
        if self.n_l < 0:
            raise ParameterError(f"n_l must be >= 0, got {self.n_l}")
        if not 1 <= self.d <= 8:
            raise ParameterError(f"d must be in [1, 8], got {self.d}")
        if not 0.0 < self.r <= 1.0:
            raise ParameterError(f"r must be in (0, 1], got {self.r}")
        if not 0.0 <= self.p <= PURITY_OFF:
            raise ParameterError(f"p must be in [0, {PURITY_OFF}], got {self.p}")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"eta must be in (0, 1], got {self.eta}")

    def key(self) -> tuple:
        return (
            self.n_f,
            self.n_l,
            self.d,
            float(self.r),
            float(self.p),
            float(self.eta),
            self.complete_secure,
        )


class LeafAssignmentLog:
    """Per federated tree, the leaf instance sets the passive party sees.

    An entry is recorded where federated growth stops: at a leaf of the
    federated region, or at the root of a purity-hidden subtree, which is
    the finest cell still visible to the passive party. Entries require
    at least one passive-party split on the routing path; instances that
    only ever pass through active or locally grown nodes never appear.
    Slots exist for every federated tree (one per class slot for
    multiclass), including trees that end up contributing no entries.
    """

    def __init__(self):
        self._slots: list[dict[int, np.ndarray]] = []

    @property
    def n_slots(self) -> int:
        return len(self._slots)

    @property
    def entry_count(self) -> int:
        return sum(len(s) for s in self._slots)

    def new_slot(self) -> int:
        self._slots.append({})
        return len(self._slots) - 1

    def record(self, slot: int, leaf_id: int, instances: np.ndarray) -> None:
        self._slots[slot][leaf_id] = np.asarray(instances)

    def slot_entries(self, slot: int):
        return self._slots[slot].items()

    def entries(self):
        for slot, leaves in enumerate(self._slots):
            for leaf_id, members in leaves.items():
                yield slot, leaf_id, members

    def prefix(self, n_slots: int) -> "LeafAssignmentLog":
        view = LeafAssignmentLog()
        view._slots = self._slots[:n_slots]
        return view


@dataclass
class RoundMetrics:
    """Per federated round: HE cost in seconds and attack accuracy."""

    costs: list = field(default_factory=list)
    leakage: list = field(default_factory=list)


@dataclass
class SplitDecision:
    owner: str | None
    feature: int = -1
    bin: int = -1
    gain: float = 0.0
    left_instances: np.ndarray | None = None


@dataclass
class SBOResult:
    forest: Forest
    leaf_log: LeafAssignmentLog
    counters: HECounters
    rounds: RoundMetrics
    objectives: ObjectiveVector


def node_purity(labels: np.ndarray) -> float:
    """Fraction of the node's instances belonging to its majority class."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ParameterError("purity of an empty instance set is undefined")
    return float(np.bincount(labels).max() / len(labels))


def split_finding(
    instances: np.ndarray,
    enc_g,
    enc_h,
    g: np.ndarray,
    h: np.ndarray,
    bin_matrix: np.ndarray,
    binning,
    partition: VerticalPartition,
    backend,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    min_child_weight: float = DEFAULT_MIN_CHILD_WEIGHT,
) -> SplitDecision:
    """One round of the federated split protocol for a single node.

    The passive party aggregates encrypted per-bin gradient sums over its
    columns, the active party decrypts them, adds its own plaintext
    histograms, and picks the best cut. Ties go to the active party, then
    to the lower feature and bin. Returns a leaf decision (owner None)
    when no cut has positive gain.
    """
    instances = np.asarray(instances)
    if len(instances) == 0:
        raise ParameterError("instance space is empty")

    passive_hists = {}
    for col in partition.passive_columns:
        col = int(col)
        bin_ids = bin_matrix[instances, col]
        n_bins = binning.n_bins(col)
        sum_g = backend.histogram(enc_g, instances, bin_ids, n_bins)
        sum_h = backend.histogram(enc_h, instances, bin_ids, n_bins)
        passive_hists[col] = (sum_g, sum_h)

    active_hists = {
        int(col): build_histogram(
            bin_matrix[:, int(col)], instances, g, h, binning.n_bins(int(col))
        )[:2]
        for col in partition.active_columns
    }

    best_active = find_best_split(active_hists, lam, gamma, min_child_weight)
    best_passive = find_best_split(passive_hists, lam, gamma, min_child_weight)

    if best_active is None and best_passive is None:
        return SplitDecision(owner=None)
    if best_passive is None or (
        best_active is not None and best_active.gain >= best_passive.gain
    ):
        owner, choice = OWNER_ACTIVE, best_active
    else:
        owner, choice = OWNER_PASSIVE, best_passive
    left = instances[bin_matrix[instances, choice.feature] <= choice.bin]
    return SplitDecision(
        owner=owner,
        feature=choice.feature,
        bin=choice.bin,
        gain=choice.gain,
        left_instances=left,
    )


def derive_knowledge(
    labels: np.ndarray,
    probe: np.ndarray,
    class_count: int,
    known_per_class: int = 1,
    seed: int = 0,
) -> dict:
    """Pick the attacker's known labelled instances from the probe set."""
    rng = np.random.default_rng([seed, _SUBSEED_KNOWLEDGE])
    probe = np.asarray(probe)
    knowledge = {}
    for cls in range(class_count):
        pool = probe[labels[probe] == cls]
        if len(pool) < known_per_class:
            raise ParameterError(
                f"probe set has {len(pool)} instances of class {cls}, "
                f"need {known_per_class}"
            )
        knowledge[cls] = np.sort(rng.choice(pool, size=known_per_class, replace=False))
    return knowledge


def sbo_train(
    config: TrainingConfig,
    dataset: Dataset,
    partition: VerticalPartition,
    split: SplitIndices,
    probe: np.ndarray,
    cost_model: HECostModel | None = None,
    backend=None,
    seed: int = 0,
    knowledge: dict | None = None,
    known_per_class: int = 1,
    bin_count: int = DEFAULT_BIN_COUNT,
    lam: float = DEFAULT_LAMBDA,
    gamma: float = DEFAULT_GAMMA,
    min_child_weight: float = DEFAULT_MIN_CHILD_WEIGHT,
    transcript: list | None = None,
) -> SBOResult:
    """Train one federated model and measure all three objectives.

    Stage 1 boosts ``n_l`` rounds on the active party's columns alone.
    Stage 2 runs ``n_f`` federated rounds: each round subsamples
    floor(r * n_train) instances, encrypts their gradients, and grows one
    tree per class slot, applying the purity threshold at every node
    above the depth limit. Per-round HE cost comes from counter deltas
    priced by ``cost_model``; per-round leakage is the clustering attack
    run against the log accumulated so far. The returned objectives are
    (utility loss on the test rows, summed cost, maximum leakage).
    """
    config.validate()
    if partition.n_columns != dataset.n_columns:
        raise ParameterError("partition does not cover the dataset columns")
    cost_model = cost_model or HECostModel()
    backend = backend or CountingBackend()

    train_rows = np.asarray(split.train_rows)
    test_rows = np.asarray(split.test_rows)
    probe = np.asarray(probe)
    if not np.isin(probe, train_rows).all():
        raise ParameterError("probe instances must come from the training rows")

    labels = dataset.labels
    class_count = dataset.class_count
    loss = LOSS_LOGISTIC if class_count == 2 else LOSS_SOFTMAX
    slots = 1 if loss == LOSS_LOGISTIC else class_count
    if knowledge is None:
        knowledge = derive_knowledge(labels, probe, class_count, known_per_class, seed)

    x_train = dataset.features[train_rows]
    y_train = labels[train_rows]
    n_train = len(train_rows)
    binning = quantile_binning(x_train, bin_count)
    bin_matrix = binning.bin_matrix(x_train)
    active_cols = [int(c) for c in partition.active_columns]

    forest = Forest(
        trees=[],
        learning_rate=config.eta,
        loss=loss,
        class_count=class_count,
        feature_count=dataset.n_columns,
    )
    scores = np.zeros((n_train,) if loss == LOSS_LOGISTIC else (n_train, class_count))

    def slot_gradients(k, g, h):
        if loss == LOSS_LOGISTIC:
            return g, h
        return g[:, k], h[:, k]

    def apply_tree(tree, k):
        update = config.eta * tree.leaf_values(x_train)
        if loss == LOSS_LOGISTIC:
            scores[:] += update
        else:
            scores[:, k] += update
        forest.trees.append(tree)

    # stage 1: local boosting by the active party, full train set
    for _ in range(config.n_l):
        g, h = compute_gradients(y_train, scores, loss)
        for k in range(slots):
            gk, hk = slot_gradients(k, g, h)
            tree = _grow_stage_tree(
                binning, bin_matrix, gk, hk, active_cols, config.d,
                lam, gamma, min_child_weight, class_slot=k,
            )
            apply_tree(tree, k)

    # stage 2: federated rounds
    log = LeafAssignmentLog()
    rounds = RoundMetrics()
    sub_size = int(np.floor(config.r * n_train))
    if sub_size < 1:
        raise ParameterError("subsample ratio leaves no training instances")

    for i in range(config.n_f):
        rng = np.random.default_rng([seed, _SUBSEED_SUBSAMPLE, i])
        sub = np.sort(rng.choice(n_train, size=sub_size, replace=False))
        abs_ids = train_rows[sub]
        g, h = compute_gradients(y_train, scores, loss)
        before = backend.counters.snapshot()
        active_only = config.complete_secure and i == 0

        for k in range(slots):
            gk, hk = slot_gradients(k, g, h)
            g_sub, h_sub = gk[sub], hk[sub]
            enc_before = backend.counters.snapshot()
            enc_g = backend.encrypt_vector(g_sub)
            enc_h = backend.encrypt_vector(h_sub)
            _record(
                transcript, i, -1, "encrypt_gradients", 2 * sub_size,
                backend.counters.delta(enc_before),
            )
            slot_id = log.new_slot()
            tree = _grow_federated_tree(
                binning=binning,
                bin_matrix=bin_matrix[sub],
                g=g_sub,
                h=h_sub,
                node_labels=y_train[sub],
                abs_ids=abs_ids,
                partition=partition,
                active_cols=active_cols,
                backend=backend,
                enc_g=enc_g,
                enc_h=enc_h,
                config=config,
                log=log,
                slot_id=slot_id,
                active_only=active_only,
                lam=lam,
                gamma=gamma,
                min_child_weight=min_child_weight,
                transcript=transcript,
                round_index=i,
                class_slot=k,
            )
            apply_tree(tree, k)

        delta = backend.counters.delta(before)
        rounds.costs.append(training_cost(delta, cost_model))
        report = attack_mod.run_attack(log, probe, labels, knowledge, class_count)
        rounds.leakage.append(report.epsilon_p)

    eps_u = utility_loss(forest, dataset.features[test_rows], labels[test_rows])
    objectives = ObjectiveVector(
        utility_loss=eps_u,
        cost_seconds=float(np.sum(rounds.costs)),
        privacy_leakage=float(np.max(rounds.leakage)),
    )
    counters = HECounters(*backend.counters.snapshot())
    return SBOResult(
        forest=forest,
        leaf_log=log,
        counters=counters,
        rounds=rounds,
        objectives=objectives,
    )


def _record(transcript, round_index, node, kind, payload_size, delta: HECounters):
    if transcript is None:
        return
    transcript.append(
        {
            "round": round_index,
            "node": node,
            "message_kind": kind,
            "payload_size": int(payload_size),
            "counter_deltas": {
                "c_enc": delta.c_enc,
                "c_dec": delta.c_dec,
                "c_add": delta.c_add,
            },
        }
    )


def _grow_stage_tree(
    binning, bin_matrix, g, h, columns, max_depth, lam, gamma, min_child_weight,
    class_slot,
):
    from .boosting import grow_tree

    return grow_tree(
        binning, bin_matrix, g, h, columns, max_depth, lam, gamma,
        min_child_weight, owner=OWNER_LOCAL, kind="local", class_slot=class_slot,
    )


def _grow_federated_tree(
    binning,
    bin_matrix,
    g,
    h,
    node_labels,
    abs_ids,
    partition,
    active_cols,
    backend,
    enc_g,
    enc_h,
    config,
    log,
    slot_id,
    active_only,
    lam,
    gamma,
    min_child_weight,
    transcript,
    round_index,
    class_slot,
) -> DecisionTree:
    nodes: list[TreeNode] = [TreeNode()]

    def settle_leaf(node_id, rows, owner, visible):
        total_g = g[rows].sum()
        total_h = h[rows].sum()
        nodes[node_id] = TreeNode(weight=-total_g / (total_h + lam), owner=owner)
        if visible:
            log.record(slot_id, node_id, abs_ids[rows])

    def local_choice(rows):
        hists = {
            col: build_histogram(bin_matrix[:, col], rows, g, h, binning.n_bins(col))[:2]
            for col in active_cols
        }
        return find_best_split(hists, lam, gamma, min_child_weight)

    def expand(node_id, rows, depth, mode, passive_anc):
        owner_here = {
            _MODE_FEDERATED: OWNER_ACTIVE,
            _MODE_ACTIVE_ONLY: OWNER_ACTIVE,
            _MODE_LOCAL: OWNER_LOCAL,
        }
        if depth >= config.d:
            settle_leaf(
                node_id, rows, owner_here[mode],
                passive_anc and mode == _MODE_FEDERATED,
            )
            return
        if mode == _MODE_FEDERATED:
            if node_purity(node_labels[rows]) >= config.p:
                # The subtree below this point is grown by the active
                # party alone; the cell recorded here is the finest
                # partition the passive party ever observes for it.
                if passive_anc:
                    log.record(slot_id, node_id, abs_ids[rows])
                mode = _MODE_LOCAL

        if mode == _MODE_FEDERATED:
            before = backend.counters.snapshot()
            decision = split_finding(
                rows, enc_g, enc_h, g, h, bin_matrix, binning, partition,
                backend, lam, gamma, min_child_weight,
            )
            _record(
                transcript, round_index, node_id, "histogram_exchange",
                len(rows), backend.counters.delta(before),
            )
            if decision.owner is None:
                settle_leaf(node_id, rows, OWNER_ACTIVE, passive_anc)
                return
            owner = decision.owner
            feature, cut = decision.feature, decision.bin
        else:
            choice = local_choice(rows)
            if choice is None:
                settle_leaf(node_id, rows, owner_here[mode], False)
                return
            owner = owner_here[mode]
            feature, cut = choice.feature, choice.bin

        goes_left = bin_matrix[rows, feature] <= cut
        left_id = len(nodes)
        nodes.append(TreeNode())
        right_id = len(nodes)
        nodes.append(TreeNode())
        nodes[node_id] = TreeNode(
            feature=feature,
            threshold=float(binning.edges[feature][cut]),
            bin=cut,
            left=left_id,
            right=right_id,
            owner=owner,
        )
        child_anc = passive_anc or owner == OWNER_PASSIVE
        expand(left_id, rows[goes_left], depth + 1, mode, child_anc)
        expand(right_id, rows[~goes_left], depth + 1, mode, child_anc)

    start_mode = _MODE_ACTIVE_ONLY if active_only else _MODE_FEDERATED
    expand(0, np.arange(len(g)), 0, start_mode, False)
    return DecisionTree(nodes=nodes, kind="federated", class_slot=class_slot)
