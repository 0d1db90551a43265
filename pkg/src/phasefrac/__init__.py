"""Cohesive phase-field fracture with integration-point eigenstrain return mapping.

2D plane-strain finite elements (9-node quadrilaterals), two strength
criteria (volumetric/deviatoric multi-surface and a Drucker-Prager-like
cone), implicit Newmark dynamics and a multi-pass staggered solver.
"""

from .backend import backend_name
from .mandel import ElasticModuli, elastic_stiffness, elastic_stress
from .constitutive import (
    IPState,
    MaterialParams,
    ReturnMapError,
    ReturnMapResult,
    degradation,
    pointwise_energy,
    return_map,
    update_history,
)

__version__ = "0.1.0"

__all__ = [
    "ElasticModuli",
    "IPState",
    "MaterialParams",
    "ReturnMapError",
    "ReturnMapResult",
    "backend_name",
    "degradation",
    "elastic_stiffness",
    "elastic_stress",
    "pointwise_energy",
    "return_map",
    "update_history",
]
