"""Uniform train/predict surface over the eight model families."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Mapping, Sequence, Tuple

from .featurize import FeatureMatrix
from .forest import ForestParams, RFModel, rf_predict, train_random_forest
from .linear import (
    DEFAULT_C,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LinearSVCModel,
    LinearSVRModel,
    linear_predict,
    train_linear_svc,
    train_linear_svr,
)
from .neural import NetworkConfig, NetworkModel, network_predict, train_network

# Row order of the result tables.
MODEL_NAMES = ("svm", "rf", "dnn1", "dnn2", "dnn3", "cnn1d", "lstm", "bilstm")
DISPLAY_NAMES = {
    "svm": "SVM",
    "rf": "RF",
    "dnn1": "DNN.1",
    "dnn2": "DNN.2",
    "dnn3": "DNN.3",
    "cnn1d": "1D-CNN",
    "lstm": "LSTM",
    "bilstm": "bi-LSTM",
}
_ARCH = {"dnn1": "mlp1", "dnn2": "mlp2", "dnn3": "mlp3", "cnn1d": "cnn1d", "lstm": "lstm", "bilstm": "bilstm"}

_SVM_KEYS = {"C": float, "epsilon": float, "tol": float, "max_iter": int}
_NET_KEYS = {f.name for f in fields(NetworkConfig)} - {"architecture", "seed"}


def default_params(name: str) -> Dict[str, Any]:
    if name == "svm":
        return {"C": DEFAULT_C, "epsilon": DEFAULT_EPSILON, "tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER}
    if name == "rf":
        p = ForestParams()
        return {"n_trees": p.n_trees, "max_features": p.max_features, "min_samples_leaf": p.min_samples_leaf,
                "max_depth": p.max_depth, "bootstrap": p.bootstrap}
    if name in _ARCH:
        cfg = NetworkConfig(_ARCH[name])
        return {k: getattr(cfg, k) for k in sorted(_NET_KEYS)}
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


def _coerce(key: str, value: Any, template: Any) -> Any:
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("none", "null", ""):
            return None
        if isinstance(template, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"{key}: expected a boolean, got {value!r}")
        if isinstance(template, int) or template is None:
            try:
                return int(text)
            except ValueError:
                if template is None:
                    return float(text)
                raise ValueError(f"{key}: expected an integer, got {value!r}") from None
        if isinstance(template, float):
            return float(text)
    return value


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus its hyperparameters (defaults merged with overrides)."""

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        defaults = default_params(self.name)
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {self.name}: {sorted(unknown)}")
        merged = dict(defaults)
        for k, v in self.params.items():
            merged[k] = _coerce(k, v, defaults[k])
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.name]


@dataclass(frozen=True)
class ConstantModel:
    """Stand-in for a cross-validation fold whose training rows hold one class."""

    value: str

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}


def fit_model(spec: ModelSpec, X: FeatureMatrix, y: Sequence, classification: bool, seed: int):
    p = spec.params
    if classification and len({str(v) for v in y}) == 1:
        return ConstantModel(str(y[0]))
    if spec.name == "svm":
        if classification:
            return train_linear_svc(X, y, C=p["C"], tol=p["tol"], max_iter=p["max_iter"], seed=seed)
        return train_linear_svr(X, y, C=p["C"], epsilon=p["epsilon"], tol=p["tol"], max_iter=p["max_iter"], seed=seed)
    if spec.name == "rf":
        task = "classification" if classification else "regression"
        return train_random_forest(X, y, ForestParams(**p), seed=seed, task=task)
    config = NetworkConfig(_ARCH[spec.name], seed=seed, **p)
    targets = [str(v) for v in y] if classification else [float(v) for v in y]
    return train_network(X, targets, config)


def predict_model(model, X: FeatureMatrix) -> list:
    if isinstance(model, ConstantModel):
        out = [model.value] * X.shape[0]
    elif isinstance(model, (LinearSVRModel, LinearSVCModel)):
        out = linear_predict(model, X)
    elif isinstance(model, RFModel):
        out = rf_predict(model, X)
    elif isinstance(model, NetworkModel):
        out = network_predict(model, X)
    else:
        raise TypeError(f"not a fitted model: {type(model).__name__}")
    return [v if isinstance(v, str) else float(v) for v in out]


def model_from_dict(record: dict):
    kind = record["kind"]
    if kind == "linear_svr":
        return LinearSVRModel.from_dict(record)
    if kind == "linear_svc":
        return LinearSVCModel.from_dict(record)
    if kind == "random_forest":
        return RFModel.from_dict(record)
    if kind == "constant":
        return ConstantModel(record["value"])
    if kind == "network":
        return NetworkModel.from_dict(record)
    raise ValueError(f"unknown model record kind {kind!r}")


def load_overrides(path) -> Dict[str, Dict[str, str]]:
    """Parse a ``key=value`` config file.

    Keys are ``<model>.<param>`` (e.g. ``svm.C=10``) or a bare ``<param>``
    applied to every model that accepts it. ``#`` starts a comment.
    """
    overrides: Dict[str, Dict[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if "." in key:
                model, param = key.split(".", 1)
                if model not in MODEL_NAMES:
                    raise ValueError(f"{path}:{line_no}: unknown model {model!r}")
                overrides.setdefault(model, {})[param] = value
            else:
                overrides.setdefault("*", {})[key] = value
    return overrides


def spec_with_overrides(name: str, overrides: Mapping[str, Mapping[str, str]]) -> ModelSpec:
    defaults = default_params(name)
    params = {k: v for k, v in overrides.get("*", {}).items() if k in defaults}
    params.update(overrides.get(name, {}))
    return ModelSpec(name, params)


def dumps(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True)
