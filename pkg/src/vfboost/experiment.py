"""Experiment configuration, defaults, and campaign orchestration.

One flat INI file describes a whole campaign: dataset, probe, cost
model, GA settings, constraints, reference point, and the single-run
hyperparameters used by the train subcommand. Everything downstream is
derived deterministically from the file plus one campaign seed.
"""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import moo
from .data import (
    Dataset,
    generate_synthetic,
    load_csv,
    sample_balanced,
    train_test_split,
    vertical_partition,
)
from .errors import ConfigError, VFBoostError
from .fedproto import PURITY_OFF, TrainingConfig
from .he import HECostModel
from .objectives import Evaluator

# Default hyperparameters of the reference platforms used for comparison.
BASELINE_TABLE = {
    "fate": {"n_f": 5, "d": 3, "eta": 0.3, "r": 0.8},
    "empirical": {"n_f": 10, "d": 5, "eta": 0.3, "r": 0.8},
    "vf2boost": {"n_f": 20, "d": 7, "eta": 0.1, "r": 0.8},
}


@dataclass
class DatasetSpec:
    kind: str = "synthetic"
    samples: int = 2000
    active_features: int = 5
    passive_features: int = 5
    classes: int = 2
    class_sep: float = 1.0
    csv_path: str = ""
    label_column: str = "label"
    active_count: int = 0

    def validate(self):
        if self.kind not in ("synthetic", "csv"):
            raise ConfigError(f"dataset.kind must be synthetic or csv, got {self.kind}")
        if self.kind == "synthetic":
            if self.samples < 2 * self.classes:
                raise ConfigError(
                    f"dataset.samples must be >= {2 * self.classes}, got {self.samples}"
                )
            if self.active_features < 1 or self.passive_features < 1:
                raise ConfigError("dataset.*_features must be >= 1")
            if self.classes < 2:
                raise ConfigError(f"dataset.classes must be >= 2, got {self.classes}")
            if self.class_sep <= 0:
                raise ConfigError(f"dataset.class_sep must be > 0, got {self.class_sep}")
        else:
            if not self.csv_path:
                raise ConfigError("dataset.csv_path is required for kind = csv")
            if self.active_count < 1:
                raise ConfigError("dataset.active_count must be >= 1 for kind = csv")
            if self.classes < 2:
                raise ConfigError(f"dataset.classes must be >= 2, got {self.classes}")


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    seed: int = 7
    complete_secure: bool = True
    bins: int = 32
    probe_per_class: int = 50
    known_per_class: int = 1
    cost_model: HECostModel = field(default_factory=HECostModel)
    ga: moo.GAConfig = field(default_factory=lambda: moo.GAConfig(seed=7))
    constraints: moo.Constraints = field(default_factory=moo.Constraints)
    reference: tuple = (1.0, 100.0, 1.0)
    train: TrainingConfig = field(
        default_factory=lambda: TrainingConfig(
            n_f=5, n_l=0, d=3, r=0.8, p=PURITY_OFF, eta=0.3, complete_secure=True
        )
    )

    def validate(self):
        self.dataset.validate()
        if self.seed < 0:
            raise ConfigError(f"experiment.seed must be >= 0, got {self.seed}")
        if self.bins < 2:
            raise ConfigError(f"boosting.bins must be >= 2, got {self.bins}")
        if self.probe_per_class < 1:
            raise ConfigError("probe.per_class must be >= 1")
        if self.known_per_class < 1:
            raise ConfigError("probe.known_per_class must be >= 1")
        if any(v <= 0 for v in self.reference):
            raise ConfigError("reference components must be positive")

    def p_range(self) -> tuple:
        if self.dataset.classes == 2:
            return moo.RANGE_P_BINARY
        return moo.RANGE_P


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def config_to_ini(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "seed": str(cfg.seed),
        "complete_secure": str(cfg.complete_secure).lower(),
    }
    parser["dataset"] = {
        "kind": cfg.dataset.kind,
        "samples": str(cfg.dataset.samples),
        "active_features": str(cfg.dataset.active_features),
        "passive_features": str(cfg.dataset.passive_features),
        "classes": str(cfg.dataset.classes),
        "class_sep": repr(cfg.dataset.class_sep),
        "csv_path": cfg.dataset.csv_path,
        "label_column": cfg.dataset.label_column,
        "active_count": str(cfg.dataset.active_count),
    }
    parser["probe"] = {
        "per_class": str(cfg.probe_per_class),
        "known_per_class": str(cfg.known_per_class),
    }
    parser["cost_model"] = {
        "t_enc": repr(cfg.cost_model.t_enc),
        "t_dec": repr(cfg.cost_model.t_dec),
        "t_add": repr(cfg.cost_model.t_add),
    }
    parser["ga"] = {
        "population": str(cfg.ga.population),
        "generations": str(cfg.ga.generations),
        "crossover_prob_binary": repr(cfg.ga.crossover_prob_binary),
        "crossover_prob_real": repr(cfg.ga.crossover_prob_real),
        "mutation_prob_binary": repr(cfg.ga.mutation_prob_binary),
        "mutation_prob_real": repr(cfg.ga.mutation_prob_real),
        "sbx_index": repr(cfg.ga.sbx_index),
        "mutation_index": repr(cfg.ga.mutation_index),
    }
    parser["constraints"] = {
        "phi_p": "" if cfg.constraints.phi_p is None else repr(cfg.constraints.phi_p),
        "phi_c": "" if cfg.constraints.phi_c is None else repr(cfg.constraints.phi_c),
        "alpha": repr(cfg.constraints.alpha_p),
    }
    parser["reference"] = {
        "utility": repr(cfg.reference[0]),
        "cost": repr(cfg.reference[1]),
        "privacy": repr(cfg.reference[2]),
    }
    parser["train"] = {
        "n_f": str(cfg.train.n_f),
        "n_l": str(cfg.train.n_l),
        "d": str(cfg.train.d),
        "r": repr(cfg.train.r),
        "p": repr(cfg.train.p),
        "eta": repr(cfg.train.eta),
    }
    parser["boosting"] = {"bins": str(cfg.bins)}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def _get(parser, section, option, cast, fallback):
    if not parser.has_option(section, option):
        return fallback
    raw = parser.get(section, option).strip()
    if raw == "":
        return None if fallback is None or cast is not str else fallback
    try:
        if cast is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {option}: cannot parse {raw!r} as {cast.__name__}"
        ) from None


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    base = default_config()
    try:
        ds = DatasetSpec(
            kind=_get(parser, "dataset", "kind", str, base.dataset.kind),
            samples=_get(parser, "dataset", "samples", int, base.dataset.samples),
            active_features=_get(
                parser, "dataset", "active_features", int, base.dataset.active_features
            ),
            passive_features=_get(
                parser, "dataset", "passive_features", int, base.dataset.passive_features
            ),
            classes=_get(parser, "dataset", "classes", int, base.dataset.classes),
            class_sep=_get(parser, "dataset", "class_sep", float, base.dataset.class_sep),
            csv_path=_get(parser, "dataset", "csv_path", str, "") or "",
            label_column=_get(parser, "dataset", "label_column", str, "label") or "label",
            active_count=_get(parser, "dataset", "active_count", int, 0),
        )
        constraints = moo.Constraints(
            phi_p=_get(parser, "constraints", "phi_p", float, None),
            phi_c=_get(parser, "constraints", "phi_c", float, None),
            alpha_p=_get(parser, "constraints", "alpha", float, 20.0),
            alpha_c=_get(parser, "constraints", "alpha", float, 20.0),
        )
        seed = _get(parser, "experiment", "seed", int, base.seed)
        cfg = ExperimentConfig(
            dataset=ds,
            seed=seed,
            complete_secure=_get(
                parser, "experiment", "complete_secure", bool, base.complete_secure
            ),
            bins=_get(parser, "boosting", "bins", int, base.bins),
            probe_per_class=_get(parser, "probe", "per_class", int, base.probe_per_class),
            known_per_class=_get(
                parser, "probe", "known_per_class", int, base.known_per_class
            ),
            cost_model=HECostModel(
                t_enc=_get(parser, "cost_model", "t_enc", float, base.cost_model.t_enc),
                t_dec=_get(parser, "cost_model", "t_dec", float, base.cost_model.t_dec),
                t_add=_get(parser, "cost_model", "t_add", float, base.cost_model.t_add),
            ),
            ga=moo.GAConfig(
                population=_get(parser, "ga", "population", int, base.ga.population),
                generations=_get(parser, "ga", "generations", int, base.ga.generations),
                crossover_prob_binary=_get(
                    parser, "ga", "crossover_prob_binary", float, 0.9
                ),
                crossover_prob_real=_get(parser, "ga", "crossover_prob_real", float, 0.9),
                mutation_prob_binary=_get(
                    parser, "ga", "mutation_prob_binary", float, 0.1
                ),
                mutation_prob_real=_get(parser, "ga", "mutation_prob_real", float, 0.1),
                sbx_index=_get(parser, "ga", "sbx_index", float, 2.0),
                mutation_index=_get(parser, "ga", "mutation_index", float, 20.0),
                seed=seed,
            ),
            constraints=constraints,
            reference=(
                _get(parser, "reference", "utility", float, 1.0),
                _get(parser, "reference", "cost", float, 100.0),
                _get(parser, "reference", "privacy", float, 1.0),
            ),
            train=TrainingConfig(
                n_f=_get(parser, "train", "n_f", int, base.train.n_f),
                n_l=_get(parser, "train", "n_l", int, base.train.n_l),
                d=_get(parser, "train", "d", int, base.train.d),
                r=_get(parser, "train", "r", float, base.train.r),
                p=_get(parser, "train", "p", float, base.train.p),
                eta=_get(parser, "train", "eta", float, base.train.eta),
                complete_secure=_get(
                    parser, "experiment", "complete_secure", bool, base.complete_secure
                ),
            ),
        )
    except VFBoostError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


@dataclass
class ExperimentContext:
    """Everything one campaign evaluation needs, derived from the config."""

    dataset: Dataset
    partition: object
    split: object
    probe: np.ndarray
    evaluator: Evaluator


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    spec = cfg.dataset
    if spec.kind == "synthetic":
        return generate_synthetic(
            spec.samples,
            spec.active_features,
            spec.passive_features,
            spec.classes,
            spec.class_sep,
            seed=cfg.seed,
        )
    return load_csv(spec.csv_path, _label_selector(spec.label_column), spec.classes)


def _label_selector(label_column: str):
    try:
        return int(label_column)
    except ValueError:
        return label_column


def build_context(cfg: ExperimentConfig) -> ExperimentContext:
    cfg.validate()
    dataset = build_dataset(cfg)
    active_count = (
        cfg.dataset.active_features
        if cfg.dataset.kind == "synthetic"
        else cfg.dataset.active_count
    )
    partition = vertical_partition(dataset, active_count, seed=cfg.seed)
    split = train_test_split(dataset, seed=cfg.seed)
    train_labels = dataset.labels[split.train_rows]
    smallest_class = int(np.bincount(train_labels).min())
    per_class = min(cfg.probe_per_class, smallest_class)
    probe_local = sample_balanced(train_labels, per_class, seed=cfg.seed)
    probe = split.train_rows[probe_local]
    evaluator = Evaluator(
        dataset,
        partition,
        split,
        probe,
        cost_model=cfg.cost_model,
        base_seed=cfg.seed,
        upper_bounds=(1.0, float(cfg.reference[1]), 1.0),
        known_per_class=cfg.known_per_class,
        bin_count=cfg.bins,
    )
    return ExperimentContext(dataset, partition, split, probe, evaluator)


def baseline_configs(complete_secure: bool = True) -> dict:
    """The three reference configurations, with both defenses disabled."""
    out = {}
    for name, params in BASELINE_TABLE.items():
        out[name] = TrainingConfig(
            n_f=params["n_f"],
            n_l=0,
            d=params["d"],
            r=params["r"],
            p=PURITY_OFF,
            eta=params["eta"],
            complete_secure=complete_secure,
        )
    return out


CSV_FIELDS = [
    "n_f",
    "n_l",
    "d",
    "r",
    "p",
    "eta",
    "utility_loss",
    "cost_seconds",
    "privacy_leakage",
]


def _solution_row(config: TrainingConfig, raw: np.ndarray) -> dict:
    return {
        "n_f": config.n_f,
        "n_l": config.n_l,
        "d": config.d,
        "r": repr(config.r),
        "p": repr(config.p),
        "eta": repr(config.eta),
        "utility_loss": repr(float(raw[0])),
        "cost_seconds": repr(float(raw[1])),
        "privacy_leakage": repr(float(raw[2])),
    }


def write_front_csv(path, solutions, p_range, complete_secure) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for sol in solutions:
            cfg = moo.decode(sol.chromosome, p_range, complete_secure)
            writer.writerow(_solution_row(cfg, sol.raw))


def write_baselines_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["name"] + CSV_FIELDS)
        writer.writeheader()
        for name, cfg, raw in rows:
            row = {"name": name}
            row.update(_solution_row(cfg, raw))
            writer.writerow(row)


def write_hv_trace_csv(path, hv_trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "hypervolume"])
        for gen, hv in enumerate(hv_trace):
            writer.writerow([gen, repr(float(hv))])


def archive_to_doc(cfg: ExperimentConfig, result: moo.CampaignResult) -> dict:
    p_range = cfg.p_range()
    entries = []
    for entry in result.archive:
        decoded = moo.decode(entry.chromosome, p_range, cfg.complete_secure)
        row = {
            "generation": entry.generation,
            "n_f": decoded.n_f,
            "n_l": decoded.n_l,
            "d": decoded.d,
            "r": decoded.r,
            "p": decoded.p,
            "eta": decoded.eta,
            "utility_loss": float(entry.raw[0]),
            "cost_seconds": float(entry.raw[1]),
            "privacy_leakage": float(entry.raw[2]),
        }
        entries.append(row)
    return {
        "schema_version": "1.0",
        "kind": "archive",
        "reference": list(cfg.reference),
        "evaluations": result.evaluations,
        "entries": entries,
    }


def run_campaign(cfg: ExperimentConfig, workers: int = 1):
    """Run the constrained search plus the baseline rows, shared seeds."""
    context = build_context(cfg)
    p_range = cfg.p_range()

    def evaluate(chromosome):
        return context.evaluator(moo.decode(chromosome, p_range, cfg.complete_secure))

    result = moo.run_cmosb(
        evaluate,
        moo.SECUREBOOST_GENOME,
        cfg.ga,
        constraints=cfg.constraints if cfg.constraints.active else None,
        reference=cfg.reference,
        workers=workers,
    )
    baselines = []
    for name, baseline in baseline_configs(cfg.complete_secure).items():
        vec = context.evaluator(baseline)
        baselines.append((name, baseline, vec.as_array()))
    return context, result, baselines
