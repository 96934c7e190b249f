"""Equivalent-effect abstraction for reinforcement learning.

Collapses state-action pairs that lead to the same successor onto a single
hypothetical action, in tabular agents and in DQN.
"""

__version__ = "0.1.0"
