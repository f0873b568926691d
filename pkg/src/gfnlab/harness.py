"""Cross-validation training loop, ablation sweeps, and timing runs.

Determinism contract: every random draw is routed through
``np.random.SeedSequence`` keyed on (seed, fold) for parameter init and
(seed, fold, epoch) for batch shuffling, so a rerun with the same seed
reproduces parameters, batch order, and therefore metrics bit for bit.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import precompute_dataset
from .graphs import Dataset, DatasetMeta, normalized_adjacency, stratified_kfold
from .models import BatchedGraphs, ModelConfig, ModelInstance, make_batch
from .nn import adam_step, softmax_cross_entropy
from .sparse import CSRMatrix


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    lr: float = 0.001
    folds: int = 10
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.folds < 2 or self.jobs < 1:
            raise ValueError("epochs/batch_size/jobs must be >= 1 and folds >= 2")
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "folds": self.folds,
            "seed": self.seed,
            "jobs": self.jobs,
        }


@dataclass
class PreparedDataset:
    """Dataset lowered to training tensors: float32 feature matrices per graph,
    plus per-graph normalized adjacencies when the model aggregates."""

    name: str
    features: list[np.ndarray]
    labels: np.ndarray
    num_classes: int
    input_dim: int
    adjacencies: list[CSRMatrix] | None = None

    def __len__(self) -> int:
        return len(self.features)


def prepare_dataset(
    dataset: Dataset,
    model_config: ModelConfig,
    cache_dir: Path | str | None = None,
) -> tuple[PreparedDataset, float]:
    """Precompute model inputs; returns the prepared dataset and the seconds
    spent on feature precomputation (cache hits make this near zero)."""
    spec = model_config.feature_spec
    t0 = time.perf_counter()
    feats = precompute_dataset(dataset, spec, cache_dir)
    feature_seconds = time.perf_counter() - t0
    features = [f.matrix.astype(np.float32) for f in feats]
    adjacencies = None
    if model_config.kind == "gcn":
        adjacencies = [
            normalized_adjacency(g.graph, spec.epsilon).matrix.astype(np.float32)
            for g in dataset.graphs
        ]
    prepared = PreparedDataset(
        name=dataset.name,
        features=features,
        labels=dataset.labels,
        num_classes=dataset.num_classes,
        input_dim=features[0].shape[1],
        adjacencies=adjacencies,
    )
    return prepared, feature_seconds


@dataclass
class FoldTrace:
    """Per-epoch record for one fold. ``epoch_seconds`` stays out of the JSON
    form so reports are byte-stable across reruns."""

    fold: int
    train_size: int
    test_size: int
    train_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
            "train_loss": self.train_loss,
        }


def _gather_batch(prepared: PreparedDataset, idx: np.ndarray) -> BatchedGraphs:
    adjs = None
    if prepared.adjacencies is not None:
        adjs = [prepared.adjacencies[i] for i in idx]
    return make_batch([prepared.features[i] for i in idx], prepared.labels[idx], adjs)


def _batched_indices(indices: np.ndarray, batch_size: int):
    for start in range(0, indices.size, batch_size):
        yield indices[start : start + batch_size]


def evaluate(
    model: ModelInstance,
    prepared: PreparedDataset,
    indices: np.ndarray,
    batch_size: int,
) -> tuple[float, float]:
    """Accuracy and mean cross-entropy over ``indices`` in eval mode."""
    correct = 0
    loss_sum = 0.0
    for idx in _batched_indices(indices, batch_size):
        batch = _gather_batch(prepared, idx)
        logits = model.forward(batch, train=False)
        loss, _ = softmax_cross_entropy(logits, batch.labels)
        loss_sum += loss * idx.size
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
    return correct / indices.size, loss_sum / indices.size


def train_fold(
    prepared: PreparedDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    fold: int,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    record_metrics: bool = True,
) -> FoldTrace:
    """Train one fold. Train accuracy/loss come from the training passes
    themselves (no second sweep); test metrics are a separate eval-mode pass.
    Epoch timing covers the parameter-update loop only."""
    model = ModelInstance(
        model_config,
        prepared.input_dim,
        seed=np.random.SeedSequence((train_config.seed, fold)),
    )
    trace = FoldTrace(fold=fold, train_size=int(train_idx.size), test_size=int(test_idx.size))
    for epoch in range(train_config.epochs):
        shuffle = np.random.default_rng(
            np.random.SeedSequence((train_config.seed, fold, epoch))
        )
        order = train_idx[shuffle.permutation(train_idx.size)]
        correct = 0
        loss_sum = 0.0
        t0 = time.perf_counter()
        for idx in _batched_indices(order, train_config.batch_size):
            batch = _gather_batch(prepared, idx)
            logits = model.forward(batch, train=True)
            loss, grad = softmax_cross_entropy(logits, batch.labels)
            model.backward(grad)
            adam_step(model.params, train_config.lr)
            loss_sum += loss * idx.size
            correct += int((logits.argmax(axis=1) == batch.labels).sum())
        trace.epoch_seconds.append(time.perf_counter() - t0)
        if record_metrics:
            trace.train_acc.append(correct / train_idx.size)
            trace.train_loss.append(loss_sum / train_idx.size)
            test_acc, _ = evaluate(model, prepared, test_idx, train_config.batch_size)
            trace.test_acc.append(test_acc)
    return trace


@dataclass
class CVReport:
    dataset: str
    model: str
    model_config: dict
    train_config: dict
    best_epoch: int
    mean_acc: float
    std_acc: float
    per_fold_acc: list[float]
    folds: list[FoldTrace]

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "model_config": self.model_config,
            "train_config": self.train_config,
            "best_epoch": self.best_epoch,
            "mean_acc": self.mean_acc,
            "std_acc": self.std_acc,
            "per_fold_acc": self.per_fold_acc,
            "folds": [t.to_dict() for t in self.folds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        return (
            f"{self.dataset} {self.model}: "
            f"{100 * self.mean_acc:.2f} ± {100 * self.std_acc:.2f} @ epoch {self.best_epoch}"
        )


_WORKER_STATE: dict = {}


def _init_worker(prepared, model_config, train_config):
    _WORKER_STATE["args"] = (prepared, model_config, train_config)


def _run_worker(task):
    fold, train_idx, test_idx = task
    prepared, model_config, train_config = _WORKER_STATE["args"]
    return train_fold(prepared, model_config, train_config, fold, train_idx, test_idx)


def select_best_epoch(traces: list[FoldTrace]) -> tuple[int, float, float, list[float]]:
    """Pick the epoch with the highest mean test accuracy across folds
    (earliest epoch on ties) and report mean/std/per-fold accuracy there."""
    acc = np.array([t.test_acc for t in traces])
    mean_per_epoch = acc.mean(axis=0)
    best = int(np.argmax(mean_per_epoch))
    at_best = acc[:, best]
    return best, float(at_best.mean()), float(at_best.std(ddof=0)), [float(a) for a in at_best]


def run_cv(
    dataset: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    cache_dir: Path | str | None = None,
) -> CVReport:
    """Stratified k-fold cross-validation of one model on one dataset."""
    prepared, _ = prepare_dataset(dataset, model_config, cache_dir)
    plan = stratified_kfold(dataset, train_config.folds, train_config.seed)
    tasks = [(f, plan.train_indices(f), plan.test_indices(f)) for f in range(train_config.folds)]
    if train_config.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=train_config.jobs,
            initializer=_init_worker,
            initargs=(prepared, model_config, train_config),
        ) as pool:
            traces = list(pool.map(_run_worker, tasks))
    else:
        traces = [
            train_fold(prepared, model_config, train_config, f, tr, te) for f, tr, te in tasks
        ]
    best, mean_acc, std_acc, per_fold = select_best_epoch(traces)
    return CVReport(
        dataset=dataset.name,
        model=model_config.kind,
        model_config=model_config.to_dict(),
        train_config=train_config.to_dict(),
        best_epoch=best,
        mean_acc=mean_acc,
        std_acc=std_acc,
        per_fold_acc=per_fold,
        folds=traces,
    )


def subsample_dataset(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Class-stratified random subsample.

    Per-class quotas use largest-remainder rounding so the subsample's class
    mix tracks the full dataset as closely as integer counts allow.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dataset
    labels = dataset.labels
    counts = np.bincount(labels, minlength=dataset.num_classes)
    exact = fraction * counts
    take = np.floor(exact).astype(np.int64)
    total = int(round(fraction * len(dataset)))
    extra = max(total - int(take.sum()), 0)
    by_remainder = np.lexsort((np.arange(counts.size), -(exact - take)))
    for cls in by_remainder:
        if extra == 0:
            break
        if take[cls] < counts[cls]:
            take[cls] += 1
            extra -= 1
    rng = np.random.default_rng(np.random.SeedSequence((seed, len(dataset))))
    keep: list[np.ndarray] = []
    for cls in range(counts.size):
        members = np.flatnonzero(labels == cls)
        if take[cls] < members.size:
            members = rng.choice(members, size=int(take[cls]), replace=False)
        keep.append(members)
    order = np.sort(np.concatenate(keep))
    return Dataset(
        name=f"{dataset.name}-sub{fraction:g}",
        graphs=[dataset.graphs[i] for i in order],
        num_classes=dataset.num_classes,
        feature_dim=dataset.feature_dim,
        meta=DatasetMeta(),
    )


def feature_ablation_cells():
    """The eight input configurations swept in the feature ablation: raw
    features always on, degrees on or off, propagation depth 0 to 3."""
    from .features import FeatureSpec

    cells = []
    for use_degree in (False, True):
        for K in (0, 1, 2, 3):
            parts = []
            if use_degree:
                parts.append("d")
            if K:
                parts.append("a" + "".join(str(i) for i in range(1, K + 1)) + "x")
            name = "+".join(parts) if parts else "none"
            cells.append((name, FeatureSpec(use_degree=use_degree, include_raw=True, K=K)))
    return cells


def ablation_sweep(
    dataset: Dataset,
    axis: str,
    model_config: ModelConfig,
    train_config: TrainConfig,
    depth_values=None,
    cache_dir: Path | str | None = None,
) -> list[dict]:
    """Sweep either the feature configuration ('features') or the number of
    per-node transform layers ('depth'); returns one result row per cell."""
    rows = []
    if axis == "features":
        for name, spec in feature_ablation_cells():
            cfg = ModelConfig(
                kind=model_config.kind,
                num_classes=model_config.num_classes,
                hidden_dim=model_config.hidden_dim,
                num_conv_layers=model_config.num_conv_layers,
                feature_spec=spec,
            )
            report = run_cv(dataset, cfg, train_config, cache_dir)
            rows.append(
                {
                    "axis": "features",
                    "value": name,
                    "mean_acc": report.mean_acc,
                    "std_acc": report.std_acc,
                    "best_epoch": report.best_epoch,
                }
            )
    elif axis == "depth":
        if not depth_values:
            raise ValueError("depth axis needs at least one layer count")
        for depth in depth_values:
            if depth < 0:
                raise ValueError("layer counts must be nonnegative")
            cfg = ModelConfig(
                kind=model_config.kind,
                num_classes=model_config.num_classes,
                hidden_dim=model_config.hidden_dim,
                num_conv_layers=int(depth),
                feature_spec=model_config.feature_spec,
            )
            report = run_cv(dataset, cfg, train_config, cache_dir)
            rows.append(
                {
                    "axis": "depth",
                    "value": int(depth),
                    "mean_acc": report.mean_acc,
                    "std_acc": report.std_acc,
                    "best_epoch": report.best_epoch,
                }
            )
    else:
        raise ValueError(f"unknown ablation axis {axis!r}")
    return rows


def write_ablation_csv(rows: list[dict], train_config: TrainConfig, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={train_config.seed} epochs={train_config.epochs} folds={train_config.folds}\n")
        writer = csv.DictWriter(fh, fieldnames=["axis", "value", "mean_acc", "std_acc", "best_epoch"])
        writer.writeheader()
        writer.writerows(rows)


@dataclass
class TimingEntry:
    model: str
    feature_seconds: float
    epoch_seconds: list[float]
    median_epoch_seconds: float
    speedup_vs_gcn: float | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "feature_seconds": self.feature_seconds,
            "epoch_seconds": self.epoch_seconds,
            "median_epoch_seconds": self.median_epoch_seconds,
            "speedup_vs_gcn": self.speedup_vs_gcn,
        }


@dataclass
class TimingReport:
    dataset: str
    epochs: int
    warmup: int
    seed: int
    entries: list[TimingEntry]

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "epochs": self.epochs,
            "warmup": self.warmup,
            "seed": self.seed,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def benchmark_timing(
    dataset: Dataset,
    kinds: list[str],
    train_config: TrainConfig,
    warmup: int = 1,
    cache_dir: Path | str | None = None,
) -> TimingReport:
    """Time one training fold per model kind on identical fold splits.

    The per-epoch figure is the median over post-warmup epochs; feature
    precomputation is timed separately since it is a one-off cost. Speedups
    are relative to the gcn entry when present.
    """
    if train_config.epochs <= warmup:
        raise ValueError("need more epochs than warmup to measure anything")
    plan = stratified_kfold(dataset, train_config.folds, train_config.seed)
    train_idx, test_idx = plan.train_indices(0), plan.test_indices(0)
    entries = []
    for kind in kinds:
        num_classes = dataset.num_classes
        cfg = ModelConfig(kind=kind, num_classes=num_classes)
        prepared, feature_seconds = prepare_dataset(dataset, cfg, cache_dir)
        trace = train_fold(
            prepared, cfg, train_config, 0, train_idx, test_idx, record_metrics=False
        )
        times = trace.epoch_seconds[warmup:]
        entries.append(
            TimingEntry(
                model=kind,
                feature_seconds=feature_seconds,
                epoch_seconds=trace.epoch_seconds,
                median_epoch_seconds=float(np.median(times)),
            )
        )
    base = next((e for e in entries if e.model == "gcn"), None)
    if base is not None:
        for e in entries:
            e.speedup_vs_gcn = base.median_epoch_seconds / e.median_epoch_seconds
    else:
        warnings.warn("no gcn entry; speedups left unset", stacklevel=2)
    return TimingReport(
        dataset=dataset.name,
        epochs=train_config.epochs,
        warmup=warmup,
        seed=train_config.seed,
        entries=entries,
    )
