from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass
class AgentConfig:
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon: float = 0.1
    # exponential decay time constant in episodes; None keeps epsilon fixed
    epsilon_decay: Optional[float] = None
    optimizer: str = "adam"
    target_sync: int = 100
    replay_capacity: int = 10_000
    batch_size: int = 32
    # episode after which the learning rate drops tenfold; None never decays
    lr_decay_episode: Optional[int] = None
    hidden: Sequence[int] = (128, 128)
    activation: str = "tanh"
    train_start: int = 32
    updates_per_step: int = 1
    # TD loss: squared error, or Huber with this threshold; None keeps squared
    huber_delta: Optional[float] = None
    # rescale the gradient when its global norm exceeds this; None never clips
    clip_grad_norm: Optional[float] = None
    # tabular EEA bootstrap: "algorithm" reads max_a' through the models,
    # "reduced" reads the precomputed reduced-table slots
    bootstrap: str = "algorithm"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("replay capacity must hold at least one batch")
        if self.huber_delta is not None and self.huber_delta <= 0:
            raise ValueError("huber_delta must be positive")
        if self.clip_grad_norm is not None and self.clip_grad_norm <= 0:
            raise ValueError("clip_grad_norm must be positive")
        if self.optimizer not in ("sgd", "adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in ("tanh", "relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bootstrap not in ("algorithm", "reduced"):
            raise ValueError(f"bootstrap must be 'algorithm' or 'reduced', got {self.bootstrap!r}")
