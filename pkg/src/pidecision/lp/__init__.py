"""Small dense linear-programming kernel (two-phase simplex, Bland's rule)."""
from ._backend import DEFAULT as BACKEND
from ._backend import available as available_backends
from .oracle import vertex_enumeration
from .solver import LinearProgram, LpError, LpSolution, solve

__all__ = [
    "BACKEND",
    "LinearProgram",
    "LpError",
    "LpSolution",
    "available_backends",
    "solve",
    "vertex_enumeration",
]
