"""
Discretization of continuous state-space models.
"""

from tmdid.dynamics.discretization import (
    DiscreteStateSpace,
    exact_discretize,
    step,
    taylor_discretize,
)

__all__ = ["DiscreteStateSpace", "taylor_discretize", "exact_discretize", "step"]
