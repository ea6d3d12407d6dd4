"""Drinfeld-Sokolov reduction and KdV-type hierarchies in exact arithmetic."""

__version__ = "0.1.0"

from .diffpoly import DiffPoly, DiffPolyRing  # noqa: E402
from .hierarchy import (  # noqa: E402
    CertificateError,
    FlowEquation,
    flow_commutator,
    generate_flow_generalized,
    generate_flow_kdv,
    generate_flow_mkdv,
    miura_intertwining_residual,
    zero_curvature_residual,
)
from .gauge import miura_map  # noqa: E402
from .lie import get_heisenberg, make_sln  # noqa: E402

__all__ = [
    "CertificateError",
    "DiffPoly",
    "DiffPolyRing",
    "FlowEquation",
    "__version__",
    "flow_commutator",
    "generate_flow_generalized",
    "generate_flow_kdv",
    "generate_flow_mkdv",
    "get_heisenberg",
    "make_sln",
    "miura_intertwining_residual",
    "miura_map",
    "zero_curvature_residual",
]
