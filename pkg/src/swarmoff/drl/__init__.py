"""Deep Q-learning for the offloading decision: hand-rolled dense network,
Adam optimizer, experience replay, and the training loop."""

from .network import AdamState, Network, adam_step, backward, forward, init_network
from .train import TrainerConfig, TrainResult, train

__all__ = [
    "AdamState",
    "Network",
    "adam_step",
    "backward",
    "forward",
    "init_network",
    "TrainerConfig",
    "TrainResult",
    "train",
]
