"""Linear epsilon-insensitive SVR and one-vs-rest linear SVC.

Both reduce to the same box-and-equality constrained dual

    min  1/2 a'Qa + p'a   s.t.  z'a = 0,  0 <= a <= C,   Q_ij = z_i z_j x_i.x_j

which is solved by two-coordinate descent (maximal-violating pair with
second-order working-set selection). The bias is unregularized; once the
dual gap closes, the bias is re-solved exactly against the primal, which is
piecewise linear in b for fixed w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, NonFinite, SingleClass, TooFewRows
from .featurize import FeatureMatrix

DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 10_000

_TAU = 1e-12


@dataclass
class DualSolution:
    alpha: np.ndarray
    rho: float
    n_epochs: int
    converged: bool


def solve_dual(
    K: np.ndarray,
    z: np.ndarray,
    p: np.ndarray,
    C: float,
    tol: float,
    max_iter: int,
    rng: np.random.Generator,
    on_epoch=None,
) -> DualSolution:
    """Two-coordinate descent on the constrained dual.

    ``K`` is the Gram matrix of the dual variables (already expanded for SVR),
    ``z`` the +-1 signs of the equality constraint. An epoch is ``len(z)``
    pair updates; ``max_iter`` bounds the number of epochs. ``on_epoch(alpha,
    rho)`` is called after every epoch and at termination.
    """
    m = len(z)
    order = rng.permutation(m)  # ties in working-set selection follow this order
    K = K[np.ix_(order, order)]
    z = z[order].astype(float)
    p = p[order].astype(float)
    Q = z[:, None] * z[None, :] * K
    QD = np.diag(Q).copy()
    a = np.zeros(m)
    G = p.copy()
    converged = False
    epochs = 0

    def unpermute(vec):
        out = np.empty_like(vec)
        out[order] = vec
        return out

    step = 0
    while epochs < max_iter:
        up = np.where(z > 0, a < C, a > 0)
        low = np.where(z > 0, a > 0, a < C)
        score = -z * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        g_max = score[i]
        g_min = np.min(np.where(low, score, np.inf))
        if g_max - g_min < tol:
            converged = True
            break
        # second-order choice of j among violators in I_low
        b = g_max - score
        quad = QD[i] + QD - 2.0 * z[i] * z * Q[i]
        quad = np.where(quad > 0, quad, _TAU)
        cand = low & (b > 0)
        j = int(np.argmin(np.where(cand, -(b * b) / quad, np.inf)))

        a_i, a_j = a[i], a[j]
        if z[i] != z[j]:
            qd = QD[i] + QD[j] + 2.0 * Q[i, j]
            qd = qd if qd > 0 else _TAU
            delta = (-G[i] - G[j]) / qd
            diff = a_i - a_j
            ni, nj = a_i + delta, a_j + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            qd = QD[i] + QD[j] - 2.0 * Q[i, j]
            qd = qd if qd > 0 else _TAU
            delta = (G[i] - G[j]) / qd
            total = a_i + a_j
            ni, nj = a_i - delta, a_j + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[i] * (ni - a_i) + Q[j] * (nj - a_j)
        a[i], a[j] = ni, nj

        step += 1
        if step % m == 0:
            epochs += 1
            if on_epoch is not None:
                on_epoch(unpermute(a), _rho(a, z, G, C))

    rho = _rho(a, z, G, C)
    if on_epoch is not None:
        on_epoch(unpermute(a), rho)
    return DualSolution(unpermute(a), rho, epochs, converged)


def _rho(a: np.ndarray, z: np.ndarray, G: np.ndarray, C: float) -> float:
    zG = z * G
    free = (a > 0) & (a < C)
    if free.any():
        return float(zG[free].mean())
    at_upper = a >= C
    at_lower = a <= 0
    ub_mask = (at_upper & (z < 0)) | (at_lower & (z > 0))
    lb_mask = (at_upper & (z > 0)) | (at_lower & (z < 0))
    ub = zG[ub_mask].min() if ub_mask.any() else np.inf
    lb = zG[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isfinite(ub) and np.isfinite(lb):
        return float((ub + lb) / 2)
    return float(ub if np.isfinite(ub) else lb)


def _exact_bias(breakpoints: np.ndarray, loss_at, guess: float) -> float:
    """Minimize a convex piecewise-linear function of b given its kinks."""
    cands = np.unique(breakpoints)
    losses = np.array([loss_at(b) for b in cands])
    best = losses.min()
    flat = cands[losses <= best + 1e-12 * max(1.0, abs(best))]
    return float(np.clip(guess, flat.min(), flat.max()))


def svr_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float, epsilon: float) -> float:
    r = X @ w + b - y
    return float(0.5 * w @ w + C * np.maximum(0.0, np.abs(r) - epsilon).sum())


def svc_objective(w: np.ndarray, b: float, X: np.ndarray, s: np.ndarray, C: float) -> float:
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - s * (X @ w + b)).sum())


def _check_finite(X: np.ndarray, y: Optional[np.ndarray] = None) -> None:
    if not np.all(np.isfinite(X)):
        raise NonFinite("feature matrix contains non-finite values")
    if y is not None and not np.all(np.isfinite(y)):
        raise NonFinite("targets contain non-finite values")


def _as_array(X: Union[FeatureMatrix, np.ndarray]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.column_names
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-D feature matrix")
    return X, tuple(f"x{j}" for j in range(X.shape[1]))


@dataclass(frozen=True)
class LinearSVRModel:
    weights: np.ndarray
    bias: float
    C: float = DEFAULT_C
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    feature_names: Tuple[str, ...] = ()
    objective_history: Tuple[float, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": "linear_svr",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "hyperparameters": {"C": self.C, "epsilon": self.epsilon, "tol": self.tol, "max_iter": self.max_iter},
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "LinearSVRModel":
        hp = record["hyperparameters"]
        return cls(
            np.asarray(record["weights"], dtype=float), float(record["bias"]),
            hp["C"], hp["epsilon"], hp["tol"], hp["max_iter"], tuple(record["feature_names"]),
        )


@dataclass(frozen=True)
class LinearSVCModel:
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray  # (n_classes,)
    classes: Tuple[str, ...]
    C: float = DEFAULT_C
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    feature_names: Tuple[str, ...] = ()
    objective_history: Tuple[Tuple[float, ...], ...] = field(default=(), compare=False)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.biases

    def to_dict(self) -> dict:
        return {
            "kind": "linear_svc",
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "classes": list(self.classes),
            "hyperparameters": {"C": self.C, "tol": self.tol, "max_iter": self.max_iter},
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "LinearSVCModel":
        hp = record["hyperparameters"]
        return cls(
            np.asarray(record["weights"], dtype=float), np.asarray(record["biases"], dtype=float),
            tuple(record["classes"]), hp["C"], hp["tol"], hp["max_iter"], tuple(record["feature_names"]),
        )


class _Incumbent:
    """Best primal point seen so far; its objective sequence never increases."""

    def __init__(self, objective, bias_for):
        self.objective = objective
        self.bias_for = bias_for
        self.w = None
        self.b = 0.0
        self.value = np.inf
        self.history: List[float] = []

    def __call__(self, w: np.ndarray, rho: float) -> None:
        b = self.bias_for(w, -rho)
        value = self.objective(w, b)
        if value < self.value:
            self.w, self.b, self.value = w.copy(), b, value
        self.history.append(self.value)


def _binary_svc(X: np.ndarray, s: np.ndarray, C: float, tol: float, max_iter: int,
                rng: np.random.Generator) -> Tuple[np.ndarray, float, List[float]]:
    n = X.shape[0]
    K = X @ X.T

    def bias_for(w, guess):
        r = X @ w
        return _exact_bias(s - r, lambda b: np.maximum(0.0, 1.0 - s * (r + b)).sum(), guess)

    inc = _Incumbent(lambda w, b: svc_objective(w, b, X, s, C), bias_for)
    solve_dual(K, s, -np.ones(n), C, tol, max_iter, rng,
               on_epoch=lambda alpha, rho: inc((alpha * s) @ X, rho))
    return inc.w, inc.b, inc.history


def train_linear_svr(
    X: Union[FeatureMatrix, np.ndarray],
    y: Sequence[float],
    C: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> LinearSVRModel:
    Xv, names = _as_array(X)
    y = np.asarray(y, dtype=float)
    _check_finite(Xv, y)
    n = Xv.shape[0]
    if n < 2:
        raise TooFewRows(f"SVR needs at least 2 rows, got {n}")
    if len(y) != n:
        raise DimensionMismatch(f"{n} rows but {len(y)} targets")
    K = Xv @ Xv.T
    K2 = np.block([[K, K], [K, K]])
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])

    def bias_for(w, guess):
        r = Xv @ w
        kinks = np.concatenate([y - r - epsilon, y - r + epsilon])
        return _exact_bias(kinks, lambda b: np.maximum(0.0, np.abs(r + b - y) - epsilon).sum(), guess)

    inc = _Incumbent(lambda w, b: svr_objective(w, b, Xv, y, C, epsilon), bias_for)

    def on_epoch(a, rho):
        inc((a[:n] - a[n:]) @ Xv, rho)

    solve_dual(K2, z, p, C, tol, max_iter, np.random.default_rng(seed), on_epoch=on_epoch)
    return LinearSVRModel(inc.w, inc.b, C, epsilon, tol, max_iter, names, tuple(inc.history))


def train_linear_svc(
    X: Union[FeatureMatrix, np.ndarray],
    labels: Sequence,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    classes: Optional[Sequence[str]] = None,
) -> LinearSVCModel:
    """One-vs-rest: one binary hinge-loss machine per class (even for 2 classes).

    Class order is sorted unless ``classes`` is given.
    """
    Xv, names = _as_array(X)
    _check_finite(Xv)
    labels = [str(v) for v in labels]
    if len(labels) != Xv.shape[0]:
        raise DimensionMismatch(f"{Xv.shape[0]} rows but {len(labels)} labels")
    present = sorted(set(labels))
    if len(present) < 2:
        raise SingleClass(f"need at least 2 classes, found {present}")
    class_list = tuple(classes) if classes is not None else tuple(present)
    lab = np.array(labels)
    rng = np.random.default_rng(seed)
    W, B, hist = [], [], []
    for cls in class_list:
        s = np.where(lab == cls, 1.0, -1.0)
        w, b, h = _binary_svc(Xv, s, C, tol, max_iter, rng)
        W.append(w)
        B.append(b)
        hist.append(tuple(h))
    return LinearSVCModel(np.array(W), np.array(B), class_list, C, tol, max_iter, names, tuple(hist))


def linear_predict(model: Union[LinearSVRModel, LinearSVCModel], X: Union[FeatureMatrix, np.ndarray]):
    Xv, _ = _as_array(X)
    d = model.weights.shape[-1]
    if Xv.shape[1] != d:
        raise DimensionMismatch(f"model expects {d} features, got {Xv.shape[1]}")
    if isinstance(model, LinearSVRModel):
        return Xv @ model.weights + model.bias
    scores = model.decision_function(Xv)
    # np.argmax returns the first maximum, i.e. ties go to the earlier class
    return [model.classes[k] for k in np.argmax(scores, axis=1)]
