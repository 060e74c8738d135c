"""Metrics, leave-one-out splitters, the cross-validation runner and reports."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, group_by_juice
from .errors import MixedLayout, SingleClass, TooFewGroups, TooFewSamples, ZeroVariance
from .featurize import FeatureSpec, apply_standardizer, assemble_features, fit_standardizer, is_classification
from .models import DISPLAY_NAMES, MODEL_NAMES, ModelSpec, fit_model, predict_model

CV_SCHEMES = ("loso", "lojo")
REGRESSION_METRICS = ("mae", "rmse", "evs")
CLASSIFICATION_METRICS = ("accuracy", "f1")
METRIC_LABELS = {"mae": "MAE", "rmse": "RMSE", "evs": "EVS", "accuracy": "Accuracy", "f1": "F1"}
METRIC_CONVENTIONS = {
    "f1": "macro average over classes present in y_true; per-class F1 = 0 when P + R = 0",
    "evs": "1 - Var(y - y_hat) / Var(y) with population (divide-by-n) variance",
    "pooling": "test predictions pooled across folds, metrics computed once",
}


# -- metrics ------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionSet:
    y: Tuple
    y_pred: Tuple
    sample_ids: Tuple[str, ...] = ()
    folds: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", tuple(self.y))
        object.__setattr__(self, "y_pred", tuple(self.y_pred))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "folds", tuple(self.folds))
        if len(self.y) != len(self.y_pred) or not self.y:
            raise ValueError("y and y_pred must be non-empty and of equal length")

    def __len__(self) -> int:
        return len(self.y)


def regression_metrics(y: Sequence[float], y_pred: Sequence[float]) -> Dict[str, float]:
    y = np.asarray(y, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    resid = y - y_pred
    var_y = np.var(y)
    if var_y == 0:
        raise ZeroVariance("true values are constant; EVS is undefined")
    return {
        "mae": float(np.mean(np.abs(resid))),
        "rmse": float(np.sqrt(np.mean(resid ** 2))),
        "evs": float(1.0 - np.var(resid) / var_y),
    }


def classification_metrics(y: Sequence, y_pred: Sequence) -> Dict[str, float]:
    y = [str(v) for v in y]
    y_pred = [str(v) for v in y_pred]
    accuracy = sum(a == b for a, b in zip(y, y_pred)) / len(y)
    f1s = []
    for cls in sorted(set(y)):
        tp = sum(a == cls and b == cls for a, b in zip(y, y_pred))
        fp = sum(a != cls and b == cls for a, b in zip(y, y_pred))
        fn = sum(a == cls and b != cls for a, b in zip(y, y_pred))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return {"accuracy": float(accuracy), "f1": float(np.mean(f1s))}


def compute_metrics(p: PredictionSet, classification: bool) -> Dict[str, float]:
    if classification:
        return classification_metrics(p.y, p.y_pred)
    return regression_metrics(p.y, p.y_pred)


# -- splitters ----------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    folds: Tuple[Tuple[Tuple[int, ...], Tuple[int, ...]], ...]

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def _plan_from_groups(n: int, groups: Sequence[Sequence[int]]) -> FoldPlan:
    folds = []
    for test in groups:
        test_set = set(test)
        train = tuple(i for i in range(n) if i not in test_set)
        folds.append((train, tuple(test)))
    return FoldPlan(tuple(folds))


def split_leave_one_sample_out(dataset: Dataset) -> FoldPlan:
    n = len(dataset)
    if n < 2:
        raise TooFewSamples(f"leave-one-sample-out needs at least 2 samples, got {n}")
    return _plan_from_groups(n, [[i] for i in range(n)])


def split_leave_one_juice_out(dataset: Dataset) -> FoldPlan:
    groups = group_by_juice(dataset)
    if len(groups) < 2:
        raise TooFewGroups(f"leave-one-juice-out needs at least 2 juices, got {len(groups)}")
    return _plan_from_groups(len(dataset), list(groups.values()))


def make_folds(dataset: Dataset, cv: str) -> FoldPlan:
    if cv == "loso":
        return split_leave_one_sample_out(dataset)
    if cv == "lojo":
        return split_leave_one_juice_out(dataset)
    raise ValueError(f"unknown cv scheme {cv!r}; expected one of {CV_SCHEMES}")


# -- runner -------------------------------------------------------------------


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


@dataclass(frozen=True)
class ResultTable:
    task: str
    model: str
    cv: str
    seed: int
    metrics: Dict[str, float]
    predictions: PredictionSet
    feature_spec: Optional[dict] = None
    model_spec: Optional[dict] = None

    @property
    def classification(self) -> bool:
        return is_classification(self.task)


def run_experiment(
    dataset: Dataset,
    feature_spec: FeatureSpec,
    model_spec: ModelSpec,
    cv: str,
    seed: int = 0,
    workers: int = 1,
) -> ResultTable:
    """Cross-validate one model on one target.

    Each fold standardizes with training-row statistics only and trains with
    ``fold_seed(seed, fold)``. Test predictions are pooled in fold order and
    scored once, so the result does not depend on ``workers``.
    """
    plan = make_folds(dataset, cv)
    X, y = assemble_features(dataset, feature_spec)
    classification = is_classification(feature_spec.target)
    if classification and len(set(y)) < 2:
        raise SingleClass(f"{feature_spec.target} has a single class {y[0]!r}; nothing to classify")
    if not classification and np.var(np.asarray(y, dtype=float)) == 0:
        raise ZeroVariance(f"{feature_spec.target} is constant; EVS is undefined")

    def run_fold(k: int):
        train, test = plan.folds[k]
        assert not set(train) & set(test)
        X_train = X.rows(train)
        std = fit_standardizer(X_train)
        model = fit_model(model_spec, apply_standardizer(std, X_train), [y[i] for i in train],
                          classification, fold_seed(seed, k))
        return predict_model(model, apply_standardizer(std, X.rows(test)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_fold, range(len(plan))))
    else:
        outputs = [run_fold(k) for k in range(len(plan))]

    ys, preds, ids, folds = [], [], [], []
    for k, ((_, test), out) in enumerate(zip(plan.folds, outputs)):
        for i, pred in zip(test, out):
            ys.append(y[i])
            preds.append(pred)
            ids.append(dataset.samples[i].sample_id)
            folds.append(k)
    pooled = PredictionSet(tuple(ys), tuple(preds), tuple(ids), tuple(folds))
    return ResultTable(
        task=feature_spec.target,
        model=model_spec.name,
        cv=cv,
        seed=seed,
        metrics=compute_metrics(pooled, classification),
        predictions=pooled,
        feature_spec=feature_spec.to_dict(),
        model_spec=model_spec.to_dict(),
    )


# -- persistence --------------------------------------------------------------


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _cell(v) -> str:
    return v if isinstance(v, str) else repr(float(v))


def predictions_csv(p: PredictionSet) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "fold", "y", "y_pred"])
    for sid, fold, yt, yp in zip(p.sample_ids, p.folds, p.y, p.y_pred):
        w.writerow([sid, fold, _cell(yt), _cell(yp)])
    return buf.getvalue().encode("utf-8")


def write_result(table: ResultTable, out_dir, manifest_extra: Optional[dict] = None) -> None:
    """Write ``metrics.json``, ``predictions.csv`` and ``manifest.json``."""
    out_dir = Path(out_dir)
    metrics = {"task": table.task, "model": table.model, "cv": table.cv, "seed": table.seed}
    metrics.update(table.metrics)
    manifest = {
        "task": table.task,
        "model": table.model,
        "cv": table.cv,
        "seed": table.seed,
        "feature_spec": table.feature_spec,
        "model_spec": table.model_spec,
        "metric_conventions": METRIC_CONVENTIONS,
        "n_samples": len(table.predictions),
        "n_folds": len(set(table.predictions.folds)),
    }
    manifest.update(manifest_extra or {})
    atomic_write(out_dir / "metrics.json", _json_bytes(metrics))
    atomic_write(out_dir / "predictions.csv", predictions_csv(table.predictions))
    atomic_write(out_dir / "manifest.json", _json_bytes(manifest))


def load_result(result_dir) -> ResultTable:
    result_dir = Path(result_dir)
    metrics = json.loads((result_dir / "metrics.json").read_text(encoding="utf-8"))
    manifest_path = result_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else {}
    classification = is_classification(metrics["task"])
    ys, preds, ids, folds = [], [], [], []
    with open(result_dir / "predictions.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["sample_id"])
            folds.append(int(row["fold"]))
            if classification:
                ys.append(row["y"])
                preds.append(row["y_pred"])
            else:
                ys.append(float(row["y"]))
                preds.append(float(row["y_pred"]))
    names = CLASSIFICATION_METRICS if classification else REGRESSION_METRICS
    return ResultTable(
        task=metrics["task"],
        model=metrics["model"],
        cv=metrics["cv"],
        seed=metrics["seed"],
        metrics={k: metrics[k] for k in names},
        predictions=PredictionSet(tuple(ys), tuple(preds), tuple(ids), tuple(folds)),
        feature_spec=manifest.get("feature_spec"),
        model_spec=manifest.get("model_spec"),
    )


# -- reports ------------------------------------------------------------------


def format_report(tables: Sequence[ResultTable], fmt: str = "md") -> str:
    """Model x metric grid, one column block per (task, cv), 3-decimal cells.

    Rows follow the SVM, RF, DNN.1-3, 1D-CNN, LSTM, bi-LSTM order.
    """
    if not tables:
        raise ValueError("no result tables to report")
    kinds = {t.classification for t in tables}
    if len(kinds) > 1:
        raise MixedLayout("cannot mix regression and classification results in one report")
    metric_names = CLASSIFICATION_METRICS if kinds.pop() else REGRESSION_METRICS

    groups: List[Tuple[str, str]] = []
    for t in tables:
        if (t.task, t.cv) not in groups:
            groups.append((t.task, t.cv))
    cells: Dict[Tuple[str, str, str], Dict[str, float]] = {(t.model, t.task, t.cv): t.metrics for t in tables}
    models = [m for m in MODEL_NAMES if any(t.model == m for t in tables)]

    header = ["Model"]
    for task, cv in groups:
        for m in metric_names:
            header.append(METRIC_LABELS[m] if len(groups) == 1 else f"{METRIC_LABELS[m]} ({task}, {cv})")
    rows = []
    for model in models:
        row = [DISPLAY_NAMES[model]]
        for task, cv in groups:
            metrics = cells.get((model, task, cv))
            for m in metric_names:
                row.append("" if metrics is None else f"{metrics[m]:.3f}")
        rows.append(row)

    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"
