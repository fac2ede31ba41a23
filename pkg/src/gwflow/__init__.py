"""gwflow: finite-volume simulator for saturated/unsaturated groundwater
flow solving the pressure-head form of Richards' equation with Picard
linearization, Van Genuchten-Mualem closures, heuristic adaptive time
stepping and deterministic thread-parallel assembly/solve."""

__version__ = "0.1.0"

from .constitutive import (
    FluidProps,
    VanGenuchtenParams,
    capillary_capacity,
    conductivity_from_permeability,
    effective_saturation,
    kr_of_thetae,
    mobility,
    permeability_from_conductivity,
    theta_of_h,
)
from .fields import BoundarySpec, CellField, Material, update_secondary_fields
from .linsolve import CgResult, LinearSolveError, SparseSystem, solve_cg, spmv
from .mesh import (
    CellKind,
    Mesh,
    PatchRule,
    TerrainSurface,
    build_box_mesh,
    refine_uniform,
    synth_terrain_mesh,
)
from .richards import PicardConfig, RichardsProblem, StepReport, mass_balance, picard_residual
from .timectl import ControllerState, TimeControlConfig, next_dt
from .vtk_legacy import read_vtk_legacy, write_vtk_legacy

__all__ = [
    "__version__",
    "FluidProps", "VanGenuchtenParams", "theta_of_h", "effective_saturation",
    "capillary_capacity", "kr_of_thetae", "mobility",
    "permeability_from_conductivity", "conductivity_from_permeability",
    "BoundarySpec", "CellField", "Material", "update_secondary_fields",
    "SparseSystem", "CgResult", "LinearSolveError", "solve_cg", "spmv",
    "CellKind", "Mesh", "PatchRule", "TerrainSurface", "build_box_mesh",
    "refine_uniform", "synth_terrain_mesh",
    "PicardConfig", "RichardsProblem", "StepReport", "mass_balance", "picard_residual",
    "ControllerState", "TimeControlConfig", "next_dt",
    "read_vtk_legacy", "write_vtk_legacy",
]
