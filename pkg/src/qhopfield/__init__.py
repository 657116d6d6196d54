"""Storage capacity and dynamics of an open quantum Hopfield network."""

from .capacity import CapacityResult, Reason, SaddleState, compute_capacity, solve_saddle
from .meanfield import FieldProfile, ModelParams, OverlapState
from .quadrature import GaussianGrid, build_grid

__all__ = [
    "CapacityResult", "Reason", "SaddleState", "compute_capacity", "solve_saddle",
    "FieldProfile", "ModelParams", "OverlapState", "GaussianGrid", "build_grid",
]
