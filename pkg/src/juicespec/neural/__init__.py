from .gradcheck import gradient_check
from .network import (
    ARCHITECTURES,
    Network,
    NetworkConfig,
    NetworkModel,
    build_network,
    loss_and_gradients,
    network_predict,
    network_scores,
    train_network,
    training_loss,
)

__all__ = [
    "ARCHITECTURES",
    "Network",
    "NetworkConfig",
    "NetworkModel",
    "build_network",
    "gradient_check",
    "loss_and_gradients",
    "network_predict",
    "network_scores",
    "train_network",
    "training_loss",
]
