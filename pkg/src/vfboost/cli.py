"""Command line entry point.

Subcommands: gen-data, train, attack, optimize, plot. Exit codes:
0 on success, 2 for configuration errors, 3 for runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import experiment, moo, serialize
from .attack import run_attack
from .errors import ConfigError, ParameterError, SchemaError, VFBoostError
from .fedproto import sbo_train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vfboost",
        description="Federated boosting trainer, leaf-clustering attack, "
        "and multi-objective hyperparameter search.",
    )
    parser.add_argument(
        "--print-defaults",
        action="store_true",
        help="print the default configuration file and exit",
    )
    sub = parser.add_subparsers(dest="command")

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment INI file")
            p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV plus sidecar")
    common(p)

    p = sub.add_parser("train", help="one federated training run with reports")
    common(p)

    p = sub.add_parser("attack", help="replay the clustering attack from artifacts")
    p.add_argument("--forest", required=True, help="forest JSON from train")
    p.add_argument("--log", required=True, help="leaf log JSON from train")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("optimize", help="run the multi-objective campaign")
    common(p)
    p.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="evaluation worker pool size (results are pool-size independent)",
    )

    p = sub.add_parser("plot", help="render front projections and the HV trace")
    p.add_argument("--front", required=True, help="front CSV from optimize")
    p.add_argument("--trace", default=None, help="HV trace CSV from optimize")
    p.add_argument("--baselines", default=None, help="baselines CSV from optimize")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _load(args) -> experiment.ExperimentConfig:
    cfg = experiment.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.ga = moo.GAConfig(
            population=cfg.ga.population,
            generations=cfg.ga.generations,
            crossover_prob_binary=cfg.ga.crossover_prob_binary,
            crossover_prob_real=cfg.ga.crossover_prob_real,
            mutation_prob_binary=cfg.ga.mutation_prob_binary,
            mutation_prob_real=cfg.ga.mutation_prob_real,
            sbx_index=cfg.ga.sbx_index,
            mutation_index=cfg.ga.mutation_index,
            seed=args.seed,
        )
        cfg.validate()
    return cfg


def cmd_gen_data(args) -> int:
    cfg = _load(args)
    dataset = experiment.build_dataset(cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "dataset.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"f{i}" for i in range(dataset.n_columns)] + ["label"]
        writer.writerow(header)
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    serialize.write_json(
        os.path.join(args.out, "dataset.json"),
        {
            "schema_version": serialize.SCHEMA_VERSION,
            "kind": "dataset",
            "samples": dataset.n_rows,
            "feature_columns": dataset.n_columns,
            "classes": dataset.class_count,
            "seed": cfg.seed,
            "label_column": "label",
        },
    )
    print(f"wrote {csv_path} ({dataset.n_rows} rows, {dataset.class_count} classes)")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    context = experiment.build_context(cfg)
    result = sbo_train(
        cfg.train,
        context.dataset,
        context.partition,
        context.split,
        context.probe,
        cost_model=cfg.cost_model,
        seed=cfg.seed,
        known_per_class=cfg.known_per_class,
        bin_count=cfg.bins,
    )
    os.makedirs(args.out, exist_ok=True)
    serialize.write_json(
        os.path.join(args.out, "forest.json"), serialize.forest_to_doc(result.forest)
    )
    from .fedproto import derive_knowledge

    knowledge = derive_knowledge(
        context.dataset.labels,
        context.probe,
        context.dataset.class_count,
        cfg.known_per_class,
        cfg.seed,
    )
    serialize.write_json(
        os.path.join(args.out, "leaf_log.json"),
        serialize.leaf_log_to_doc(
            result.leaf_log,
            context.dataset.class_count,
            context.probe,
            context.dataset.labels[context.probe],
            knowledge,
        ),
    )
    serialize.write_json(
        os.path.join(args.out, "report.json"),
        {
            "schema_version": serialize.SCHEMA_VERSION,
            "kind": "train_report",
            "config": {
                "n_f": cfg.train.n_f,
                "n_l": cfg.train.n_l,
                "d": cfg.train.d,
                "r": cfg.train.r,
                "p": cfg.train.p,
                "eta": cfg.train.eta,
                "complete_secure": cfg.train.complete_secure,
            },
            "objectives": {
                "utility_loss": result.objectives.utility_loss,
                "cost_seconds": result.objectives.cost_seconds,
                "privacy_leakage": result.objectives.privacy_leakage,
            },
            "counters": {
                "c_enc": result.counters.c_enc,
                "c_dec": result.counters.c_dec,
                "c_add": result.counters.c_add,
            },
            "round_costs": [float(v) for v in result.rounds.costs],
            "round_leakage": [float(v) for v in result.rounds.leakage],
        },
    )
    obj = result.objectives
    print(
        f"utility_loss={obj.utility_loss:.4f} cost_seconds={obj.cost_seconds:.4f} "
        f"privacy_leakage={obj.privacy_leakage:.4f}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    forest_doc = serialize.read_json(args.forest)
    serialize.forest_from_doc(forest_doc)
    log, class_count, probe, probe_labels, knowledge = serialize.leaf_log_from_doc(
        serialize.read_json(args.log)
    )
    labels = np.zeros(int(probe.max()) + 1 if len(probe) else 1, dtype=np.int64)
    labels[probe] = probe_labels
    report = run_attack(log, probe, labels, knowledge, class_count)
    os.makedirs(args.out, exist_ok=True)
    serialize.write_json(
        os.path.join(args.out, "attack_report.json"),
        {
            "schema_version": serialize.SCHEMA_VERSION,
            "kind": "attack_report",
            "epsilon_p": report.epsilon_p,
            "applicable": report.applicable,
            "degenerate": report.degenerate,
            "cluster_sizes": report.cluster_sizes,
            "confusion": None
            if report.confusion is None
            else [[int(v) for v in row] for row in report.confusion],
        },
    )
    print(f"epsilon_p={report.epsilon_p:.4f} applicable={report.applicable}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load(args)
    context, result, baselines = experiment.run_campaign(cfg, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    p_range = cfg.p_range()
    experiment.write_front_csv(
        os.path.join(args.out, "front.csv"), result.front, p_range, cfg.complete_secure
    )
    serialize.write_json(
        os.path.join(args.out, "archive.json"), experiment.archive_to_doc(cfg, result)
    )
    experiment.write_hv_trace_csv(os.path.join(args.out, "hv_trace.csv"), result.hv_trace)
    experiment.write_baselines_csv(os.path.join(args.out, "baselines.csv"), baselines)
    print(
        f"front size {len(result.front)}, {result.evaluations} evaluations, "
        f"{context.evaluator.evaluations} trainings, final HV {result.hv_trace[-1]:.4f}"
    )
    return EXIT_OK


def _read_front_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"utility_loss", "cost_seconds", "privacy_leakage"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise SchemaError(f"{path}: missing objective columns")
        for row in reader:
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: front file has no solutions")
    return rows


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _read_front_csv(args.front)
    front = np.array(
        [
            [
                float(r["utility_loss"]),
                float(r["cost_seconds"]),
                float(r["privacy_leakage"]),
            ]
            for r in rows
        ]
    )
    baselines = []
    if args.baselines:
        for row in _read_front_csv(args.baselines):
            baselines.append(
                (
                    row.get("name", "baseline"),
                    float(row["utility_loss"]),
                    float(row["cost_seconds"]),
                    float(row["privacy_leakage"]),
                )
            )
    os.makedirs(args.out, exist_ok=True)

    panels = [
        ("PL", "UL", 2, 0),
        ("TC", "UL", 1, 0),
        ("PL", "TC", 2, 1),
    ]
    markers = ["s", "^", "D", "v", "P"]
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (xa, ya, xi, yi) in zip(axes, panels):
        ax.scatter(front[:, xi], front[:, yi], c="tab:blue", label="front")
        for k, (name, u, c, p) in enumerate(baselines):
            vec = (u, c, p)
            ax.scatter(
                [vec[xi]], [vec[yi]], marker=markers[k % len(markers)],
                c="tab:red", label=name,
            )
        ax.set_xlabel(xa)
        ax.set_ylabel(ya)
        ax.legend(fontsize="small")
    fig.tight_layout()
    front_path = os.path.join(args.out, "front_projections.svg")
    fig.savefig(front_path, metadata={"Date": None})
    plt.close(fig)

    if args.trace:
        gens, values = [], []
        with open(args.trace, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "hypervolume" not in reader.fieldnames:
                raise SchemaError(f"{args.trace}: not an HV trace file")
            for row in reader:
                gens.append(int(row["generation"]))
                values.append(float(row["hypervolume"]))
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(gens, values, marker="o")
        ax.set_xlabel("generation")
        ax.set_ylabel("hypervolume")
        fig.tight_layout()
        fig.savefig(os.path.join(args.out, "hv_trace.svg"), metadata={"Date": None})
        plt.close(fig)
    print(f"wrote {front_path}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "attack": cmd_attack,
    "optimize": cmd_optimize,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(experiment.config_to_ini(experiment.default_config()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VFBoostError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
