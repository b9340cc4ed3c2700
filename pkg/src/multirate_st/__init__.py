"""Monolithic multirate tensor-product space-time finite elements."""
from .temporal import build_hierarchy, dg_basis, restriction_matrix, temporal_matrix
from .slab import ProblemSpec, SlabAssembler, TermSpec, march

__version__ = "0.1.0"

__all__ = [
    "build_hierarchy",
    "dg_basis",
    "restriction_matrix",
    "temporal_matrix",
    "ProblemSpec",
    "SlabAssembler",
    "TermSpec",
    "march",
]
