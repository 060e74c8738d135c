"""Central finite-difference check of the hand-written backward passes."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .network import (
    Network,
    NetworkConfig,
    build_network,
    loss_and_gradients,
    loss_only,
)


def gradient_check(
    config: NetworkConfig,
    X_small: np.ndarray,
    y_small: Sequence,
    step: float = 1e-5,
    network: Optional[Network] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> float:
    """Max over parameters of |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).

    A network is initialized from ``config.seed`` unless one is supplied;
    its biases are then drawn from N(0, 0.1^2), since zero biases behind a
    dead ReLU layer put pre-activations exactly on the kink. The loss is
    evaluated on the whole small batch.
    """
    X = np.asarray(X_small, dtype=float)
    y = list(y_small)
    classification = any(isinstance(v, str) for v in y)
    if classification:
        classes = sorted({str(v) for v in y})
        target = np.array([classes.index(str(v)) for v in y], dtype=int)
        n_out = len(classes)
    else:
        target = np.asarray(y, dtype=float)
        n_out = 1
    if feature_names is None:
        feature_names = [f"a{200 + 2 * j:04d}" for j in range(X.shape[1])]
    if network is None:
        rng = np.random.default_rng([config.seed, 1])
        net = build_network(config, feature_names, n_out, np.random.default_rng(config.seed))
        for name in net.params:
            if name.endswith(".b"):
                net.params[name] = rng.normal(0.0, 0.1, size=net.params[name].shape)
    else:
        net = network

    _, analytic = loss_and_gradients(net, X, target, classification)
    worst = 0.0
    for name, param in net.params.items():
        g_a = analytic[name]
        flat = param.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            plus = loss_only(net, X, target, classification)
            flat[k] = orig - step
            minus = loss_only(net, X, target, classification)
            flat[k] = orig
            g_fd = (plus - minus) / (2 * step)
            ga = g_a.reshape(-1)[k]
            rel = abs(ga - g_fd) / max(1e-8, abs(ga) + abs(g_fd))
            worst = max(worst, rel)
    return worst
