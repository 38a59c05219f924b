"""Strict feasibility of homogeneous second-order conic systems.

A short-step interior-point method on a homogeneous embedding decides
whether ``A x = 0, x in int K`` or ``A^T y + s = 0, s in int K`` is solvable,
running its linear algebra in simulated variable precision.
"""

from .conditioning import Instance, condition_number, gen_dual_instance, gen_primal_instance
from .embed import build_embedding, initial_point, normalize_blocks
from .ipm import Outcome, SolverConfig, solve
from .lorentz import BlockVec, ConeStructure
from .roundoff import RoundingContext

__all__ = [
    "BlockVec",
    "ConeStructure",
    "Instance",
    "Outcome",
    "RoundingContext",
    "SolverConfig",
    "build_embedding",
    "condition_number",
    "gen_dual_instance",
    "gen_primal_instance",
    "initial_point",
    "normalize_blocks",
    "solve",
]

__version__ = "0.1.0"
