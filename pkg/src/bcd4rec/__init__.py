"""Batch RL lab for session-based recommendation.

Implements batch-constrained distributional Q-learning agents (DQN, BCQ,
QRDQN, QRBCQ, IQN, BCD4Rec) over a seedable interest-evolution user
simulator, plus log generation, behavior cloning, and the online/offline
evaluation suite.
"""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
