"""Training and evaluation flow: manifests, protocol config, model bundles,
and the train / evaluate / predict / budget-sweep operations behind the CLI.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import metrics
from .errors import (ConfigError, DegenerateStratum, DescDetectError, NoPositives,
                     NonConvergenceWarning, SchemaVersionMismatch)
from .extract import DescriptorRecord, extract
from .features import FeatureSchema, encode_many, fit_schema, flatten
from .learners import EnsembleModel, ForestParams, model_from_dict, train_forest, train_svm
from .selection import (BUDGETS, FOREST_SPACE, SVM_SPACE, distribution_from_dict, random_search,
                        sequester_validation, stratified_shuffle_split, subsample_budget, trial_log)

log = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
DEFAULT_SEED = 42
MODEL_NAMES = ("ensemble", "forest", "svm")


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: Optional[int]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    entries: tuple

    @property
    def labels(self):
        return [e.label for e in self.entries]

    def is_labeled(self) -> bool:
        return all(e.label is not None for e in self.entries)


def load_manifest(path) -> DatasetManifest:
    """Read a ``path,label`` table (header required, label 0/1/empty).

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries, seen = [], set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["path", "label"]:
            raise ConfigError(f"{path}: manifest must start with a 'path,label' header")
        for lineno, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            item = row[0].strip()
            raw = row[1].strip() if len(row) > 1 else ""
            if raw not in ("", "0", "1"):
                raise ConfigError(f"{path}:{lineno}: label must be 0, 1 or empty, got {raw!r}")
            resolved = item if os.path.isabs(item) else str(base / item)
            if resolved in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate entry {item}")
            seen.add(resolved)
            entries.append(ManifestEntry(resolved, int(raw) if raw else None))
    return DatasetManifest(path.stem, tuple(entries))


def extract_manifest(manifest: DatasetManifest):
    """Extract every entry, skipping (and logging) the ones that fail.

    Returns ``(records, labels, failures)``.
    """
    records, labels, failures = [], [], []
    for entry in manifest.entries:
        try:
            records.append(extract(entry.path))
            labels.append(entry.label)
        except (DescDetectError, OSError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            failures.append((entry.path, str(exc)))
    return records, labels, failures


# -- protocol configuration ----------------------------------------------------

@dataclass(frozen=True)
class ProtocolConfig:
    budget: Optional[float] = None
    budgets: tuple = BUDGETS
    n_splits: int = 10
    eval_fraction: float = 0.25
    trials: int = 1000
    metric: str = "average_precision"
    threshold: float = 0.5
    workers: int = 1
    forest_space: dict = field(default_factory=lambda: dict(FOREST_SPACE))
    svm_space: dict = field(default_factory=lambda: dict(SVM_SPACE))

    def __post_init__(self):
        for b in ((self.budget,) if self.budget is not None else ()) + tuple(self.budgets):
            if b not in BUDGETS:
                raise ConfigError(f"budget {b} is not one of {BUDGETS}")
        if self.metric not in ("average_precision", "f1"):
            raise ConfigError(f"unknown selection metric {self.metric!r}")
        if self.trials < 1 or self.n_splits < 1:
            raise ConfigError("trials and n_splits must be >= 1")

    @classmethod
    def from_dict(cls, doc) -> "ProtocolConfig":
        doc = dict(doc or {})
        known = {"budget", "budgets", "n_splits", "eval_fraction", "trials", "metric", "threshold",
                 "workers", "search"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: doc[k] for k in known - {"search"} if k in doc}
        if "budget" in kwargs and kwargs["budget"] is not None:
            kwargs["budget"] = float(kwargs["budget"])
        if "budgets" in kwargs:
            kwargs["budgets"] = tuple(float(b) for b in kwargs["budgets"])
        search = doc.get("search") or {}
        for name, key, default in (("forest", "forest_space", FOREST_SPACE), ("svm", "svm_space", SVM_SPACE)):
            if name in search:
                space = dict(default)
                space.update({p: distribution_from_dict(d) for p, d in search[name].items()})
                kwargs[key] = space
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ProtocolConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def summary(self) -> dict:
        return {
            "budget": self.budget, "n_splits": self.n_splits, "eval_fraction": self.eval_fraction,
            "trials": self.trials, "metric": self.metric, "threshold": self.threshold,
            "search": {
                "forest": {k: v.to_dict() for k, v in sorted(self.forest_space.items())},
                "svm": {k: v.to_dict() for k, v in sorted(self.svm_space.items())},
            },
        }


# -- learners as search targets ------------------------------------------------

def fit_forest(X, y, params, seed):
    return train_forest(X, y, ForestParams(**params), seed)


def fit_svm(X, y, params, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        return train_svm(X, y, C=params["C"], gamma=params["gamma"], seed=seed)


def _child_seed(seed, *key):
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


# -- bundles -------------------------------------------------------------------

@dataclass(frozen=True)
class ModelBundle:
    schema: FeatureSchema
    model: EnsembleModel
    selected: str = "ensemble"
    protocol: dict = field(default_factory=dict)
    format_version: int = BUNDLE_FORMAT_VERSION

    def member(self, name: Optional[str] = None):
        name = name or self.selected
        if name == "ensemble":
            return self.model
        if name == "forest":
            return self.model.forest
        if name == "svm":
            return self.model.svm
        raise ValueError(f"unknown model {name!r}")

    def encode(self, records: Sequence[DescriptorRecord]) -> np.ndarray:
        return encode_many(self.schema, [flatten(r) for r in records])

    def predict_proba(self, records, name: Optional[str] = None) -> np.ndarray:
        X = self.encode(records)
        if len(X) == 0:
            return np.zeros(0)
        return self.member(name).predict_proba(X)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "schema_version": self.schema.version,
            "schema": self.schema.to_dict(),
            "selected": self.selected,
            "protocol": self.protocol,
            "model": self.model.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ModelBundle":
        doc = json.loads(text)
        if doc.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise SchemaVersionMismatch(
                f"bundle format {doc.get('format_version')!r} is not supported "
                f"(this build reads version {BUNDLE_FORMAT_VERSION})")
        schema = FeatureSchema.from_dict(doc["schema"])
        if doc.get("schema_version") != schema.version:
            raise SchemaVersionMismatch("bundle schema_version does not match its embedded schema")
        return cls(schema, model_from_dict(doc["model"]), doc["selected"], doc["protocol"], doc["format_version"])

    def save(self, path):
        atomic_write(path, self.dumps())

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- training ------------------------------------------------------------------

@dataclass
class TrainResult:
    bundle: ModelBundle
    forest_trials: list
    svm_trials: list
    validation: dict          # model name -> EvaluationReport on the sequestered set
    train_indices: np.ndarray
    validation_indices: np.ndarray


def train(records: Sequence[DescriptorRecord], labels, config: ProtocolConfig = ProtocolConfig(),
          seed: int = DEFAULT_SEED) -> TrainResult:
    """Sequester, subsample, fit the schema, search both detectors, build the
    4:1 ensemble and keep whichever of the three validates best."""
    labels = np.asarray(labels)
    if len(records) != len(labels) or any(lab is None for lab in labels.tolist()):
        raise ConfigError("training requires a label for every record")
    labels = labels.astype(np.int64)
    if len(np.unique(labels)) < 2:
        raise DegenerateStratum("training manifest holds a single class")

    pool, held = sequester_validation(labels, seed)
    if config.budget is not None:
        chosen = pool[subsample_budget(labels[pool], config.budget, seed, reference=labels)]
    else:
        chosen = pool
    log.info("training rows: %d (budget %s), sequestered: %d", len(chosen), config.budget, len(held))

    maps = [flatten(r) for r in records]
    schema = fit_schema([maps[i] for i in chosen])
    X = encode_many(schema, maps)
    X_train, y_train = X[chosen], labels[chosen]

    plan = stratified_shuffle_split(y_train, config.n_splits, config.eval_fraction, _child_seed(seed, 1))
    forest_params, forest_trials = random_search(
        X_train, y_train, plan, config.forest_space, config.trials, fit_forest,
        config.metric, _child_seed(seed, 2), config.workers)
    svm_params, svm_trials = random_search(
        X_train, y_train, plan, config.svm_space, config.trials, fit_svm,
        config.metric, _child_seed(seed, 3), config.workers)

    forest = fit_forest(X_train, y_train, forest_params, _child_seed(seed, 4))
    svm = fit_svm(X_train, y_train, svm_params, _child_seed(seed, 5))
    ensemble = EnsembleModel(forest, svm)

    validation = {}
    candidates = {"ensemble": ensemble, "forest": forest, "svm": svm}
    for name in MODEL_NAMES:
        validation[name] = metrics.evaluate(candidates[name].predict_proba(X[held]), labels[held],
                                            config.threshold)
    selected = "ensemble"
    for name in MODEL_NAMES[1:]:
        if validation[name].ap > validation[selected].ap:
            selected = name

    protocol = {
        "seed": seed,
        "budget": config.budget,
        "n_records": len(records),
        "n_train": int(len(chosen)),
        "n_validation": int(len(held)),
        "config": config.summary(),
        "search": {
            "forest": {"best_params": forest_params, "best_mean": max(t.mean_score for t in forest_trials)},
            "svm": {"best_params": svm_params, "best_mean": max(t.mean_score for t in svm_trials)},
        },
        "validation": {name: validation[name].summary() for name in MODEL_NAMES},
    }
    bundle = ModelBundle(schema, ensemble, selected, protocol)
    return TrainResult(bundle, forest_trials, svm_trials, validation, chosen, held)


def write_train_outputs(result: TrainResult, bundle_path):
    bundle_path = Path(bundle_path)
    result.bundle.save(bundle_path)
    stem = bundle_path.with_suffix("")
    atomic_write(f"{stem}.forest_trials.csv", trial_log(result.forest_trials))
    atomic_write(f"{stem}.svm_trials.csv", trial_log(result.svm_trials))


# -- evaluation ----------------------------------------------------------------

def curve_table(report: metrics.EvaluationReport, delimiter=",") -> str:
    lines = [delimiter.join(("threshold", "recall", "precision"))]
    c = report.curve
    for t, r, p in zip(c.thresholds.tolist(), c.recall.tolist(), c.precision.tolist()):
        lines.append(delimiter.join((repr(t), repr(r), repr(p))))
    return "\n".join(lines) + "\n"


def plot_pr_curves(reports: dict, baseline: float, title: str) -> str:
    """SVG text with one PR curve per model and the prevalence baseline."""
    import io

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "descdetect", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4.5))
        for name, report in reports.items():
            c = report.curve
            if c is None:
                continue
            r = np.r_[0.0, c.recall]
            p = np.r_[c.precision[0], c.precision]
            ax.plot(r, p, label=f"{name} (F1={report.f1:.3f}, AUC={report.pr_auc:.3f}, AP={report.ap:.3f})")
        ax.axhline(baseline, color="grey", linestyle="--", label=f"baseline (p={baseline:.3f})")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("Recall")
        ax.set_ylabel("Precision")
        ax.set_title(title)
        ax.legend(loc="lower left", fontsize=7)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


@dataclass
class EvaluationResult:
    reports: dict            # model name -> EvaluationReport
    baseline: float
    n_pos: int
    n_total: int
    failures: list


def evaluate_bundle(bundle: ModelBundle, records, labels, threshold: Optional[float] = None) -> EvaluationResult:
    """Score every model in the bundle on labeled records.

    Raises :class:`NoPositives` when the set has no manipulated example.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if threshold is None:
        threshold = bundle.protocol.get("config", {}).get("threshold", 0.5)
    X = bundle.encode(records)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("evaluation manifest contains no manipulated videos")
    reports = {name: metrics.evaluate(bundle.member(name).predict_proba(X), labels, threshold)
               for name in MODEL_NAMES}
    return EvaluationResult(reports, n_pos / len(labels), n_pos, len(labels), [])


def write_evaluation(result: EvaluationResult, out_dir, selected: str, title: str = "PR curves"):
    out_dir = Path(out_dir)
    summary = {
        "selected": selected,
        "n_pos": result.n_pos,
        "n_total": result.n_total,
        "baseline": result.baseline,
        "models": {name: {k: v for k, v in r.summary().items() if k in ("f1", "pr_auc", "ap")}
                   for name, r in result.reports.items()},
    }
    atomic_write(out_dir / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for name, report in result.reports.items():
        atomic_write(out_dir / f"curve_{name}.csv", curve_table(report))
    atomic_write(out_dir / "pr_curves.svg", plot_pr_curves(result.reports, result.baseline, title))
    return summary


def write_no_positive_summary(out_dir, bundle: ModelBundle, records):
    scores = bundle.predict_proba(records)
    summary = {"selected": bundle.selected, "n_pos": 0, "n_total": len(records), "curve": None,
               "mean_probability": float(np.mean(scores)) if len(scores) else None}
    atomic_write(Path(out_dir) / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


# -- budget sweep --------------------------------------------------------------

def budget_sweep(records, labels, test_records, test_labels, config: ProtocolConfig, seed: int = DEFAULT_SEED):
    """Train once per configured budget and evaluate each on the shared test set.

    Returns a list of ``(budget, TrainResult, EvaluationResult)``.
    """
    results = []
    for budget in config.budgets:
        trained = train(records, labels, replace(config, budget=budget), seed)
        log.info("budget %.2f: %d training rows", budget, trained.bundle.protocol["n_train"])
        evaluated = evaluate_bundle(trained.bundle, test_records, test_labels, config.threshold)
        results.append((budget, trained, evaluated))
    return results


def sweep_table(results, delimiter=",") -> str:
    lines = [delimiter.join(("budget", "n_train", "model", "selected", "f1", "pr_auc", "ap"))]
    for budget, trained, evaluated in results:
        for name in MODEL_NAMES:
            r = evaluated.reports[name]
            lines.append(delimiter.join((f"{budget:.2f}", str(trained.bundle.protocol["n_train"]), name,
                                         str(int(trained.bundle.selected == name)),
                                         repr(r.f1), repr(r.pr_auc), repr(r.ap))))
    return "\n".join(lines) + "\n"
