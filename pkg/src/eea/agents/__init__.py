from .config import AgentConfig
from .dqn import DQNAgent, ReplayBuffer, dqn_episode
from .tabular import (
    TabularAgent,
    eea_q_values,
    episodes_to_optimal,
    greedy_path_length,
    q_learning_episode,
    q_planning_step,
)

__all__ = [
    "AgentConfig",
    "DQNAgent",
    "ReplayBuffer",
    "dqn_episode",
    "TabularAgent",
    "eea_q_values",
    "episodes_to_optimal",
    "greedy_path_length",
    "q_learning_episode",
    "q_planning_step",
]
