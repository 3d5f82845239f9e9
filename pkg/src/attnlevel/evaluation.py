"""Four-fold cross-validation, accuracy aggregation and report rendering.

The headline accuracy of a configuration is the mean of its per-fold
accuracies.  Standardization statistics are fitted per fold on the three
training folds only; a provenance check fails the run if any test-fold frame
ever reaches the fitting step.

Fold strategies: "stratified" splits frames keeping per-class proportions
aligned across folds; "subject" keeps each set_id inside a single fold.
Frame-level splits of video inflate accuracy through near-duplicate frames,
so subject splits are the honest choice for deployment-style claims.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .annotation import LABEL_NAMES, LABELS
from .feature_store import FeatureRecord, fit_standardizer
from .models import (
    MODALITY_DIMS,
    ModelSpec,
    TrainConfig,
    labels_vector,
    predict_labels,
    train,
)

N_CLASSES = 3


class EvaluationError(ValueError):
    pass


class LeakageError(RuntimeError):
    """A standardizer saw test-fold records during fitting."""


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # fold index per record
    strategy: str
    seed: int

    def fold_indices(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignments == fold)
        train_idx = np.flatnonzero(self.assignments != fold)
        return train_idx, test


def make_folds(
    records: Sequence[FeatureRecord],
    k: int = 4,
    strategy: str = "stratified",
    seed: int = 0,
) -> FoldPlan:
    """Deterministic fold assignment over labeled records."""
    y = labels_vector(records)
    n = len(records)
    rng = np.random.default_rng(seed)
    assignments = np.full(n, -1, dtype=np.int64)

    if strategy == "stratified":
        # deal each class round-robin so per-class proportions match across folds
        for label in np.unique(y):
            idx = np.flatnonzero(y == label)
            rng.shuffle(idx)
            for pos, record_idx in enumerate(idx):
                assignments[record_idx] = pos % k
    elif strategy == "subject":
        sets = sorted({r.set_id for r in records})
        if len(sets) < k:
            raise EvaluationError(
                f"subject folds need at least {k} distinct set_ids, got {len(sets)}"
            )
        order = list(sets)
        rng.shuffle(order)
        counts = [0] * k
        fold_of: dict[str, int] = {}
        set_sizes = {s: sum(1 for r in records if r.set_id == s) for s in order}
        for s in sorted(order, key=lambda s: -set_sizes[s]):
            fold = int(np.argmin(counts))
            fold_of[s] = fold
            counts[fold] += set_sizes[s]
        for i, r in enumerate(records):
            assignments[i] = fold_of[r.set_id]
    else:
        raise EvaluationError(f"unknown fold strategy {strategy!r}")

    return FoldPlan(k=k, assignments=assignments, strategy=strategy, seed=seed)


def confusion_matrix(truths: Sequence[int], predictions: Sequence[int]) -> np.ndarray:
    """3x3 count matrix, rows = truth, columns = prediction."""
    if len(truths) != len(predictions):
        raise EvaluationError(f"length mismatch: {len(truths)} truths vs {len(predictions)} predictions")
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(truths, predictions):
        matrix[t, p] += 1
    return matrix


def mid_involvement_share(matrix: np.ndarray) -> float:
    """Share of misclassifications whose truth or prediction is the mid label."""
    off = matrix.copy().astype(np.float64)
    np.fill_diagonal(off, 0.0)
    total = off.sum()
    if total == 0:
        return 0.0
    involved = off[1, :].sum() + off[:, 1].sum() - off[1, 1]
    return float(involved / total)


def per_class_accuracy(matrix: np.ndarray) -> list[Optional[float]]:
    """Per-class recall; None where a class has no records."""
    out: list[Optional[float]] = []
    for c in range(N_CLASSES):
        row = matrix[c].sum()
        out.append(float(matrix[c, c] / row) if row > 0 else None)
    return out


@dataclass
class EvalReport:
    spec_name: str
    strategy: str
    seed: int
    n_records: int
    fold_accuracies: list[float]
    mean_accuracy: float
    std_accuracy: float
    confusion: np.ndarray  # (3, 3) counts summed over folds
    per_class: list[Optional[float]]
    per_stream: Optional[dict[str, list[Optional[float]]]] = None

    def to_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "strategy": self.strategy,
            "seed": self.seed,
            "n_records": self.n_records,
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "confusion": self.confusion.tolist(),
            "per_class_accuracy": self.per_class,
            "per_stream_class_accuracy": self.per_stream,
            "mid_involvement_share": mid_involvement_share(self.confusion),
        }

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path: str) -> "EvalReport":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(
            spec_name=d["spec"],
            strategy=d["strategy"],
            seed=d["seed"],
            n_records=d["n_records"],
            fold_accuracies=d["fold_accuracies"],
            mean_accuracy=d["mean_accuracy"],
            std_accuracy=d["std_accuracy"],
            confusion=np.array(d["confusion"], dtype=np.int64),
            per_class=d["per_class_accuracy"],
            per_stream=d.get("per_stream_class_accuracy"),
        )


def _assert_no_leakage(fit_keys: frozenset, test_records: Sequence[FeatureRecord]) -> None:
    leaked = fit_keys & {r.key() for r in test_records}
    if leaked:
        raise LeakageError(f"standardizer was fitted on test-fold records: {sorted(leaked)[:5]}")


def cross_validate(
    spec: ModelSpec,
    records: Sequence[FeatureRecord],
    cfg: TrainConfig,
    plan: FoldPlan,
    with_streams: bool = False,
) -> EvalReport:
    """Train and evaluate one configuration across all folds of the plan."""
    if len(plan.assignments) != len(records):
        raise EvaluationError("fold plan does not cover the dataset")
    y_all = labels_vector(records)

    fold_accuracies = []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    correct_total = 0
    for fold in range(plan.k):
        train_idx, test_idx = plan.fold_indices(fold)
        if len(test_idx) == 0:
            raise EvaluationError(f"fold {fold} has no test records")
        train_records = [records[i] for i in train_idx]
        test_records = [records[i] for i in test_idx]

        standardizer = fit_standardizer(train_records)
        _assert_no_leakage(standardizer.fit_keys, test_records)

        model = train(spec, train_records, cfg, standardizer=standardizer, seed_salt=(fold,))
        preds = predict_labels(model, test_records)
        truth = y_all[test_idx]
        fold_conf = confusion_matrix(truth.tolist(), preds.tolist())
        confusion += fold_conf
        correct = int(np.trace(fold_conf))
        correct_total += correct
        fold_accuracies.append(correct / len(test_idx))

    # cross-check: accuracy accumulated independently must equal trace/total
    assert abs(correct_total / len(records) - np.trace(confusion) / confusion.sum()) < 1e-12

    report = EvalReport(
        spec_name=spec.name,
        strategy=plan.strategy,
        seed=plan.seed,
        n_records=len(records),
        fold_accuracies=fold_accuracies,
        mean_accuracy=float(np.mean(fold_accuracies)),
        std_accuracy=float(np.std(fold_accuracies, ddof=1)) if len(fold_accuracies) > 1 else 0.0,
        confusion=confusion,
        per_class=per_class_accuracy(confusion),
    )
    if with_streams:
        report.per_stream = per_stream_class_accuracy(
            [m for m in ("kp", "gf", "depth") if m in spec.modalities], records, cfg, plan
        )
    return report


def per_stream_class_accuracy(
    modalities: Sequence[str],
    records: Sequence[FeatureRecord],
    cfg: TrainConfig,
    plan: FoldPlan,
    hidden: tuple[int, ...] = (256, 256),
) -> dict[str, list[Optional[float]]]:
    """Per-class accuracy of each single-modality stream trained standalone.

    A standalone stream is the same dense stack the fusion models use per
    modality, evaluated on its own.
    """
    y_all = labels_vector(records)
    out: dict[str, list[Optional[float]]] = {}
    for mod in modalities:
        if mod not in MODALITY_DIMS:
            raise EvaluationError(f"unknown modality {mod!r}")
        spec = ModelSpec(
            name=f"stream-{mod}", kind="late", modalities=(mod,), combiner="average", hidden=hidden
        )
        confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for fold in range(plan.k):
            train_idx, test_idx = plan.fold_indices(fold)
            train_records = [records[i] for i in train_idx]
            test_records = [records[i] for i in test_idx]
            standardizer = fit_standardizer(train_records)
            _assert_no_leakage(standardizer.fit_keys, test_records)
            model = train(spec, train_records, cfg, standardizer=standardizer, seed_salt=(fold,))
            preds = predict_labels(model, test_records)
            confusion += confusion_matrix(y_all[test_idx].tolist(), preds.tolist())
        out[mod] = per_class_accuracy(confusion)
    return out


def majority_class_share(records: Sequence[FeatureRecord]) -> float:
    y = labels_vector(records)
    return float(max(np.bincount(y, minlength=N_CLASSES)) / len(y))


STREAM_DISPLAY = {"kp": "Keypoints", "gf": "Geometric Features", "depth": "Depth"}


def render_results_table(reports: Sequence[EvalReport]) -> str:
    """Accuracy table over evaluated configurations."""
    rows = [("Model", "Accuracy", "Std")]
    for r in reports:
        rows.append((r.spec_name, f"{r.mean_accuracy:.4f}", f"{r.std_accuracy:.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def render_per_stream_table(per_stream: dict[str, list[Optional[float]]]) -> str:
    """Per-class accuracy of each standalone stream."""
    rows = [("Stream", *[LABEL_NAMES[lab].capitalize() for lab in LABELS])]
    for mod, accs in per_stream.items():
        cells = tuple("n/a" if a is None else f"{a:.4f}" for a in accs)
        rows.append((STREAM_DISPLAY.get(mod, mod), *cells))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def render_confusion_text(report: EvalReport) -> str:
    names = [LABEL_NAMES[lab] for lab in LABELS]
    lines = ["confusion matrix (rows = truth, cols = prediction):"]
    header = "        " + "  ".join(f"{n:>8}" for n in names)
    lines.append(header)
    for i, name in enumerate(names):
        lines.append(f"{name:>8}" + "  " + "  ".join(f"{report.confusion[i, j]:>8d}" for j in range(3)))
    lines.append(f"misclassifications involving mid: {100 * mid_involvement_share(report.confusion):.1f}%")
    return "\n".join(lines)
