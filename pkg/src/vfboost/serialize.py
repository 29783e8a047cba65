"""Versioned JSON artifacts: forests, leaf logs, and run reports.

Every document carries a ``schema_version``; readers reject any major
version they do not understand. Writers emit sorted keys and a trailing
newline so reruns of the same configuration are byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .boosting import DecisionTree, Forest, TreeNode
from .errors import SchemaError
from .fedproto import LeafAssignmentLog

SCHEMA_VERSION = "1.0"


def _check(doc: dict, kind: str) -> None:
    version = doc.get("schema_version")
    if not isinstance(version, str) or "." not in version:
        raise SchemaError(f"missing or malformed schema_version in {kind} document")
    major = version.split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported {kind} schema major version {version}")
    if doc.get("kind") != kind:
        raise SchemaError(f"expected a {kind} document, got {doc.get('kind')!r}")


def write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None


def forest_to_doc(forest: Forest) -> dict:
    trees = []
    for tree in forest.trees:
        trees.append(
            {
                "kind": tree.kind,
                "class_slot": tree.class_slot,
                "nodes": [
                    {
                        "feature": node.feature,
                        "threshold": node.threshold,
                        "bin": node.bin,
                        "left": node.left,
                        "right": node.right,
                        "weight": node.weight,
                        "owner": node.owner,
                    }
                    for node in tree.nodes
                ],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "forest",
        "loss": forest.loss,
        "learning_rate": forest.learning_rate,
        "class_count": forest.class_count,
        "feature_count": forest.feature_count,
        "trees": trees,
    }


def forest_from_doc(doc: dict) -> Forest:
    _check(doc, "forest")
    trees = []
    for tree_doc in doc["trees"]:
        nodes = [
            TreeNode(
                feature=n["feature"],
                threshold=n["threshold"],
                bin=n["bin"],
                left=n["left"],
                right=n["right"],
                weight=n["weight"],
                owner=n["owner"],
            )
            for n in tree_doc["nodes"]
        ]
        trees.append(
            DecisionTree(
                nodes=nodes, kind=tree_doc["kind"], class_slot=tree_doc["class_slot"]
            )
        )
    return Forest(
        trees=trees,
        learning_rate=doc["learning_rate"],
        loss=doc["loss"],
        class_count=doc["class_count"],
        feature_count=doc["feature_count"],
    )


def leaf_log_to_doc(
    log: LeafAssignmentLog,
    class_count: int,
    probe: np.ndarray,
    probe_labels: np.ndarray,
    knowledge: dict,
) -> dict:
    """Bundle the leaf log with the probe context needed to replay the attack."""
    entries = [
        {"tree": int(slot), "leaf": int(leaf), "instances": [int(i) for i in members]}
        for slot, leaf, members in log.entries()
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "leaf_log",
        "class_count": int(class_count),
        "tree_slots": log.n_slots,
        "entries": entries,
        "probe": [int(i) for i in probe],
        "probe_labels": [int(v) for v in probe_labels],
        "knowledge": {str(cls): [int(i) for i in ids] for cls, ids in knowledge.items()},
    }


def leaf_log_from_doc(doc: dict):
    _check(doc, "leaf_log")
    log = LeafAssignmentLog()
    for _ in range(doc["tree_slots"]):
        log.new_slot()
    for entry in doc["entries"]:
        log.record(entry["tree"], entry["leaf"], np.asarray(entry["instances"]))
    probe = np.asarray(doc["probe"], dtype=np.int64)
    probe_labels = np.asarray(doc["probe_labels"], dtype=np.int64)
    knowledge = {
        int(cls): np.asarray(ids, dtype=np.int64)
        for cls, ids in doc["knowledge"].items()
    }
    return log, doc["class_count"], probe, probe_labels, knowledge
