"""Class-aware unsupervised domain adaptation on vector features.

Optimal cluster assignment for target pseudo-labels, self-paced pseudo-label
refinement with an auxiliary target network, and class-aware MMD alignment.
"""
from .kernels import backend

__version__ = "0.1.0"

__all__ = ["backend", "__version__"]
