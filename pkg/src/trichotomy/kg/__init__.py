"""Damped cubic wave field on flat tori: spectral evolution and variational tools."""

from .evolve import (
    KGFate,
    KGOptions,
    KGTrajectory,
    continuity_probe,
    kg_fate_experiment,
    kg_integrate,
)
from .grid import Field, KGState, TorusGrid
from .io import read_field, write_field
from .variational import (
    GroundStateResult,
    K_functional,
    ground_state_search,
    kg_energy,
    kg_static_energy,
    nehari_project,
    nehari_quotient,
    symmetry_breaking_witness,
)

__all__ = [
    "TorusGrid",
    "Field",
    "KGState",
    "kg_energy",
    "kg_static_energy",
    "K_functional",
    "nehari_project",
    "nehari_quotient",
    "GroundStateResult",
    "ground_state_search",
    "symmetry_breaking_witness",
    "KGOptions",
    "KGTrajectory",
    "KGFate",
    "kg_integrate",
    "kg_fate_experiment",
    "continuity_probe",
    "write_field",
    "read_field",
]
