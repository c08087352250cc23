"""Staggered-mesh incompressible flow solver.

Finite-volume transport of momentum, turbulence and species on a face-type
dual mesh, coupled to a P1 finite-element pressure-correction projection.
"""

from .mesh import (
    DualMesh,
    FeMesh,
    build_dual_mesh,
    galerkin_gradient,
    generate_cube_mesh,
    read_mesh,
    write_mesh,
)
from .fields import FlowState, SchemeConfig
from .driver import CaseConfig, RunRecord, advance, compute_time_step, run_case

__all__ = [
    "DualMesh",
    "FeMesh",
    "FlowState",
    "SchemeConfig",
    "CaseConfig",
    "RunRecord",
    "advance",
    "build_dual_mesh",
    "compute_time_step",
    "galerkin_gradient",
    "generate_cube_mesh",
    "read_mesh",
    "run_case",
    "write_mesh",
]
