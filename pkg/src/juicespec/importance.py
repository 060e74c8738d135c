"""Wavelength importance from forest impurity decrease and SVM coefficients."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import Dataset, parse_wavelength_column
from .errors import KTooLarge
from .featurize import FeatureSpec, apply_standardizer, assemble_features, fit_standardizer, is_classification
from .forest import ForestParams, RFModel, rf_feature_importance, train_random_forest
from .linear import (
    DEFAULT_C,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LinearSVCModel,
    LinearSVRModel,
    train_linear_svc,
    train_linear_svr,
)

METHODS = ("rf", "svm")


def svm_coefficient_importance(model: Union[LinearSVRModel, LinearSVCModel]) -> np.ndarray:
    """|w| for regression; summed |w| over the one-vs-rest machines otherwise."""
    w = np.abs(np.asarray(model.weights, dtype=float))
    return w if w.ndim == 1 else w.sum(axis=0)


def normalize_scores(raw: Sequence[float]) -> np.ndarray:
    """Min-max to [0, 1]; a constant vector maps to all zeros."""
    raw = np.asarray(raw, dtype=float)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    out = (raw - lo) / (hi - lo)
    out[raw == hi] = 1.0  # guard against 0.9999999 at the peak
    return out


@dataclass(frozen=True)
class ImportanceCurve:
    target: str
    method: str
    column_names: Tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray

    @classmethod
    def from_raw(cls, target: str, method: str, column_names: Sequence[str], raw) -> "ImportanceCurve":
        raw = np.asarray(raw, dtype=float)
        return cls(target, method, tuple(column_names), raw, normalize_scores(raw))


def top_k_wavelengths(curve: ImportanceCurve, k: int = 5) -> List[Tuple[Union[int, str], float]]:
    """k best columns by normalized score.

    Ties: wavelengths ascending, then non-spectral columns in their original
    order. Wavelength columns are reported as integers (nm).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(curve.column_names):
        raise KTooLarge(f"k={k} exceeds the {len(curve.column_names)} scored columns")

    def sort_key(j: int):
        wl = parse_wavelength_column(curve.column_names[j])
        return (-curve.normalized[j], 0 if wl is not None else 1, wl if wl is not None else j)

    order = sorted(range(len(curve.column_names)), key=sort_key)[:k]
    out = []
    for j in order:
        wl = parse_wavelength_column(curve.column_names[j])
        out.append((wl if wl is not None else curve.column_names[j], float(curve.normalized[j])))
    return out


@dataclass(frozen=True)
class ImportanceSettings:
    forest: ForestParams = ForestParams()
    C: float = DEFAULT_C
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


def rank_wavelengths(
    dataset: Dataset,
    feature_spec: FeatureSpec,
    seed: int = 0,
    settings: ImportanceSettings = ImportanceSettings(),
    methods: Sequence[str] = METHODS,
) -> Dict[str, ImportanceCurve]:
    """Fit each method once on the full, standardized dataset (no CV)."""
    X, y = assemble_features(dataset, feature_spec)
    Xs = apply_standardizer(fit_standardizer(X), X)
    classification = is_classification(feature_spec.target)
    curves: Dict[str, ImportanceCurve] = {}
    for method in methods:
        if method == "rf":
            model = train_random_forest(
                Xs, y, settings.forest, seed=seed, task="classification" if classification else "regression"
            )
            raw = rf_feature_importance(model)
        elif method == "svm":
            if classification:
                svm = train_linear_svc(Xs, y, C=settings.C, tol=settings.tol, max_iter=settings.max_iter, seed=seed)
            else:
                svm = train_linear_svr(Xs, y, C=settings.C, epsilon=settings.epsilon, tol=settings.tol,
                                       max_iter=settings.max_iter, seed=seed)
            raw = svm_coefficient_importance(svm)
        else:
            raise ValueError(f"unknown importance method {method!r}")
        curves[method] = ImportanceCurve.from_raw(feature_spec.target, method, Xs.column_names, raw)
    return curves


def importance_csv(curves: Sequence[ImportanceCurve]) -> bytes:
    """Long format: wavelength rows first (plot-ready), parameters after."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", "method", "column_name", "wavelength_nm", "raw_score", "normalized_score"])
    for curve in curves:
        spectral = [j for j, c in enumerate(curve.column_names) if parse_wavelength_column(c) is not None]
        other = [j for j in range(len(curve.column_names)) if j not in set(spectral)]
        for j in spectral + other:
            name = curve.column_names[j]
            wl = parse_wavelength_column(name)
            w.writerow([curve.target, curve.method, name, "" if wl is None else wl,
                        repr(float(curve.raw[j])), repr(float(curve.normalized[j]))])
    return buf.getvalue().encode("utf-8")


def topk_csv(curves: Sequence[ImportanceCurve], k: int = 5) -> bytes:
    """Wide rank x (target, method) grid; cells are nm or parameter names."""
    columns = [(c.target, c.method) for c in curves]
    rankings = [top_k_wavelengths(c, k) for c in curves]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank"] + [f"{t}:{m}" for t, m in columns])
    for r in range(k):
        w.writerow([r + 1] + [ranking[r][0] for ranking in rankings])
    return buf.getvalue().encode("utf-8")
