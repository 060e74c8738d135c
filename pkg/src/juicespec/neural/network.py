"""MLP / 1-D CNN / LSTM / bi-LSTM models trained with mini-batch Adam.

Spectral columns (``aNNNN``) form a single-channel sequence in ascending
wavelength order for the sequence encoders; any other columns skip the
encoder and join the dense head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DimensionMismatch, DivergedLoss, NonFinite, TooFewRows
from ..featurize import FeatureMatrix, spectral_columns
from . import layers as L

ARCHITECTURES = ("mlp1", "mlp2", "mlp3", "cnn1d", "lstm", "bilstm")
SEQUENCE_ARCHITECTURES = ("cnn1d", "lstm", "bilstm")


@dataclass(frozen=True)
class NetworkConfig:
    architecture: str = "mlp1"
    hidden_width: int = 64
    conv_filters: int = 8
    conv_kernel: int = 7
    pool_size: int = 2
    lstm_hidden: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}")
        for name in ("hidden_width", "conv_filters", "conv_kernel", "pool_size", "lstm_hidden",
                     "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def n_hidden_layers(self) -> int:
        return int(self.architecture[3]) if self.architecture.startswith("mlp") else 0


@dataclass
class Network:
    """Parameters plus the wiring needed to run them.

    ``spectral`` indexes the input columns fed to a sequence encoder;
    ``extra`` indexes those routed straight to the head.
    """

    config: NetworkConfig
    params: Dict[str, np.ndarray]
    n_inputs: int
    n_outputs: int
    spectral: Tuple[int, ...] = ()
    extra: Tuple[int, ...] = ()

    # -- construction --

    @classmethod
    def initialize(cls, config: NetworkConfig, n_inputs: int, n_outputs: int,
                   spectral: Sequence[int] = (), rng: Optional[np.random.Generator] = None) -> "Network":
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        arch = config.architecture
        params: Dict[str, np.ndarray] = {}
        spectral = tuple(spectral)
        extra: Tuple[int, ...] = ()
        if arch in SEQUENCE_ARCHITECTURES:
            if not spectral:
                raise ValueError(f"{arch} needs spectral columns to form its input sequence")
            extra = tuple(j for j in range(n_inputs) if j not in set(spectral))
        if arch.startswith("mlp"):
            width_in = n_inputs
            for k in range(config.n_hidden_layers):
                params[f"dense{k}.W"] = L.glorot(rng, (width_in, config.hidden_width), width_in, config.hidden_width)
                params[f"dense{k}.b"] = np.zeros(config.hidden_width)
                width_in = config.hidden_width
            head_in = width_in
        elif arch == "cnn1d":
            k, F = config.conv_kernel, config.conv_filters
            T = len(spectral)
            if k > T:
                raise ValueError(f"conv kernel {k} longer than the {T}-point sequence")
            params["conv.W"] = L.glorot(rng, (k, F), k, k * F)
            params["conv.b"] = np.zeros(F)
            pooled = (T - k + 1) // config.pool_size
            if pooled < 1:
                raise ValueError("sequence too short for the conv + pool stack")
            head_in = pooled * F + len(extra)
        else:
            H = config.lstm_hidden
            directions = ("fwd", "bwd") if arch == "bilstm" else ("fwd",)
            for d in directions:
                params[f"lstm_{d}.Wx"] = L.glorot(rng, (1, 4 * H), 1, 4 * H)
                params[f"lstm_{d}.Wh"] = L.glorot(rng, (H, 4 * H), H, 4 * H)
                params[f"lstm_{d}.b"] = np.zeros(4 * H)
            head_in = H * len(directions) + len(extra)
        params["head.W"] = L.glorot(rng, (head_in, n_outputs), head_in, n_outputs)
        params["head.b"] = np.zeros(n_outputs)
        return cls(config, params, n_inputs, n_outputs, spectral, extra)

    # -- forward / backward --

    def forward(self, X: np.ndarray):
        """Raw head outputs (B, n_outputs) plus the cache for ``backward``."""
        p = self.params
        arch = self.config.architecture
        caches: List = []
        if arch.startswith("mlp"):
            h = X
            for k in range(self.config.n_hidden_layers):
                z, c1 = L.dense_forward(h, p[f"dense{k}.W"], p[f"dense{k}.b"])
                h, c2 = L.relu_forward(z)
                caches.append((c1, c2))
            feats = h
        else:
            seq = X[:, list(self.spectral)]
            if arch == "cnn1d":
                z, c_conv = L.conv1d_forward(seq, p["conv.W"], p["conv.b"])
                r, c_relu = L.relu_forward(z)
                pooled, c_pool = L.maxpool_forward(r, self.config.pool_size)
                caches.append((c_conv, c_relu, c_pool, pooled.shape))
                enc = pooled.reshape(pooled.shape[0], -1)
            else:
                h_f, c_f = L.lstm_forward(seq[:, :, None], p["lstm_fwd.Wx"], p["lstm_fwd.Wh"], p["lstm_fwd.b"])
                caches.append(c_f)
                enc = h_f
                if arch == "bilstm":
                    rev = seq[:, ::-1, None]
                    h_b, c_b = L.lstm_forward(rev, p["lstm_bwd.Wx"], p["lstm_bwd.Wh"], p["lstm_bwd.b"])
                    caches.append(c_b)
                    enc = np.concatenate([h_f, h_b], axis=1)
            feats = np.concatenate([enc, X[:, list(self.extra)]], axis=1) if self.extra else enc
        out, c_head = L.dense_forward(feats, p["head.W"], p["head.b"])
        return out, (caches, c_head, feats.shape[1] - len(self.extra))

    def backward(self, dout: np.ndarray, cache) -> Dict[str, np.ndarray]:
        caches, c_head, enc_width = cache
        p = self.params
        arch = self.config.architecture
        grads: Dict[str, np.ndarray] = {}
        dfeats, grads["head.W"], grads["head.b"] = L.dense_backward(dout, c_head, p["head.W"])
        if arch.startswith("mlp"):
            dh = dfeats
            for k in reversed(range(self.config.n_hidden_layers)):
                c1, c2 = caches[k]
                dz = L.relu_backward(dh, c2)
                dh, grads[f"dense{k}.W"], grads[f"dense{k}.b"] = L.dense_backward(dz, c1, p[f"dense{k}.W"])
            return grads
        denc = dfeats[:, :enc_width]
        if arch == "cnn1d":
            c_conv, c_relu, c_pool, pooled_shape = caches[0]
            dpooled = denc.reshape(pooled_shape)
            dr = L.maxpool_backward(dpooled, c_pool)
            dz = L.relu_backward(dr, c_relu)
            _, grads["conv.W"], grads["conv.b"] = L.conv1d_backward(dz, c_conv, p["conv.W"])
        else:
            H = self.config.lstm_hidden
            _, grads["lstm_fwd.Wx"], grads["lstm_fwd.Wh"], grads["lstm_fwd.b"] = L.lstm_backward(
                denc[:, :H], caches[0], p["lstm_fwd.Wx"], p["lstm_fwd.Wh"]
            )
            if arch == "bilstm":
                _, grads["lstm_bwd.Wx"], grads["lstm_bwd.Wh"], grads["lstm_bwd.b"] = L.lstm_backward(
                    denc[:, H:], caches[1], p["lstm_bwd.Wx"], p["lstm_bwd.Wh"]
                )
        return grads


# -- losses -------------------------------------------------------------------


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_output_grad(out: np.ndarray, target: np.ndarray, classification: bool):
    """Mean squared error or mean softmax cross-entropy over the batch.

    For classification ``target`` holds class indices.
    """
    B = out.shape[0]
    if classification:
        probs = softmax(out)
        picked = probs[np.arange(B), target]
        loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
        grad = probs.copy()
        grad[np.arange(B), target] -= 1.0
        return loss, grad / B
    resid = out[:, 0] - target
    return float((resid ** 2).mean()), (2.0 * resid / B)[:, None]


def loss_only(net: Network, X: np.ndarray, target: np.ndarray, classification: bool) -> float:
    out, _ = net.forward(X)
    return loss_and_output_grad(out, target, classification)[0]


def loss_and_gradients(net: Network, X: np.ndarray, target: np.ndarray, classification: bool):
    out, cache = net.forward(X)
    loss, dout = loss_and_output_grad(out, target, classification)
    return loss, net.backward(dout, cache)


# -- model record -------------------------------------------------------------


@dataclass(frozen=True)
class NetworkModel:
    network: Network
    feature_names: Tuple[str, ...]
    classes: Tuple[str, ...] = ()
    loss_history: Tuple[float, ...] = field(default=(), compare=False)

    @property
    def config(self) -> NetworkConfig:
        return self.network.config

    @property
    def params(self) -> Dict[str, np.ndarray]:
        return self.network.params

    @property
    def is_classifier(self) -> bool:
        return bool(self.classes)

    def to_dict(self) -> dict:
        return {
            "kind": "network",
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "spectral": list(self.network.spectral),
            "params": {
                name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                for name, arr in self.network.params.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkModel":
        config = NetworkConfig(**d["config"])
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["params"].items()}
        n_in = len(d["feature_names"])
        spectral = tuple(d["spectral"])
        extra = tuple(j for j in range(n_in) if j not in set(spectral)) if config.architecture in SEQUENCE_ARCHITECTURES else ()
        n_out = params["head.b"].shape[0]
        net = Network(config, params, n_in, n_out, spectral, extra)
        return cls(net, tuple(d["feature_names"]), tuple(d["classes"]))


def _prepare(X, y):
    if isinstance(X, FeatureMatrix):
        Xv, names = X.values, X.column_names
    else:
        Xv = np.asarray(X, dtype=float)
        if Xv.ndim != 2:
            raise DimensionMismatch("expected a 2-D feature matrix")
        names = tuple(f"a{200 + 2 * j:04d}" for j in range(Xv.shape[1]))
    if not np.all(np.isfinite(Xv)):
        raise NonFinite("feature matrix contains non-finite values")
    y = list(y)
    if len(y) != Xv.shape[0]:
        raise DimensionMismatch(f"{Xv.shape[0]} rows but {len(y)} targets")
    classification = any(isinstance(v, str) for v in y)
    if classification:
        classes = tuple(sorted({str(v) for v in y}))
        lookup = {c: k for k, c in enumerate(classes)}
        target = np.array([lookup[str(v)] for v in y], dtype=int)
    else:
        classes = ()
        target = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(target)):
            raise NonFinite("targets contain non-finite values")
    return Xv, tuple(names), classes, target


def build_network(config: NetworkConfig, feature_names: Sequence[str], n_outputs: int,
                  rng: Optional[np.random.Generator] = None) -> Network:
    spectral = spectral_columns(feature_names) if config.architecture in SEQUENCE_ARCHITECTURES else ()
    return Network.initialize(config, len(feature_names), n_outputs, spectral, rng)


def train_network(X: Union[FeatureMatrix, np.ndarray], y: Sequence, config: NetworkConfig = NetworkConfig()) -> NetworkModel:
    """Mini-batch Adam on MSE (numeric targets) or cross-entropy (string labels).

    Returns the parameters after the final epoch. Plain arrays are treated as
    all-spectral columns.
    """
    Xv, names, classes, target = _prepare(X, y)
    n = Xv.shape[0]
    if n < 1:
        raise TooFewRows("no training rows")
    rng = np.random.default_rng(config.seed)
    classification = bool(classes)
    net = build_network(config, names, len(classes) if classification else 1, rng)

    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(v) for k, v in net.params.items()}
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.adam_eps
    step = 0
    history: List[float] = []
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads = loss_and_gradients(net, Xv[idx], target[idx], classification)
            if not np.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} at step {step}")
            epoch_loss += loss * len(idx)
            step += 1
            for k, g in grads.items():
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                m_hat = m[k] / (1 - b1 ** step)
                v_hat = v[k] / (1 - b2 ** step)
                net.params[k] = net.params[k] - lr * m_hat / (np.sqrt(v_hat) + eps)
        history.append(epoch_loss / n)
    for k, arr in net.params.items():
        if not np.all(np.isfinite(arr)):
            raise DivergedLoss(f"parameter {k} became non-finite")
    return NetworkModel(net, names, classes, tuple(history))


def network_scores(model: NetworkModel, X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """Regression outputs (n,) or softmax class probabilities (n, K)."""
    Xv = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if Xv.ndim != 2 or Xv.shape[1] != model.network.n_inputs:
        raise DimensionMismatch(f"model expects {model.network.n_inputs} features, got {Xv.shape[-1]}")
    out, _ = model.network.forward(Xv)
    return softmax(out) if model.is_classifier else out[:, 0]


def network_predict(model: NetworkModel, X: Union[FeatureMatrix, np.ndarray]):
    scores = network_scores(model, X)
    if not model.is_classifier:
        return scores
    return [model.classes[k] for k in np.argmax(scores, axis=1)]


def training_loss(model: NetworkModel, X: Union[FeatureMatrix, np.ndarray], y: Sequence) -> float:
    Xv, _, _, _ = _prepare(X, y)
    if model.is_classifier:
        lookup = {c: k for k, c in enumerate(model.classes)}
        target = np.array([lookup[str(v)] for v in y], dtype=int)
    else:
        target = np.asarray(y, dtype=float)
    out, _ = model.network.forward(Xv)
    loss, _ = loss_and_output_grad(out, target, model.is_classifier)
    return loss
