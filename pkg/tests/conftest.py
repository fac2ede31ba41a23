import logging

import numpy as np
import pytest

from gwflow.constitutive import FluidProps, VanGenuchtenParams, permeability_from_conductivity
from gwflow.fields import BoundarySpec, CellField, Material
from gwflow.mesh import build_box_mesh
from gwflow.richards import RichardsProblem

# silence the expected hard-cap warnings emitted by stress tests
logging.getLogger("gwflow.richards").setLevel(logging.ERROR)

# Celia-type benchmark soil (SI): alpha 3.35/m, n=2, K_s 9.22e-5 m/s
SOIL = dict(alpha=3.35, n=2.0, theta_r=0.102, theta_s=0.368)
KS = 9.22e-5
H_TOP = -0.75
H_INIT = -10.0


@pytest.fixture(scope="session")
def vg():
    return VanGenuchtenParams(**SOIL)


@pytest.fixture(scope="session")
def fluid():
    return FluidProps(rho=1000.0, mu=1.0e-3, g=(0.0, 0.0, -9.81))


def make_column_problem(n_cells, fluid=None, vg_params=None, depth=1.0,
                        h_top=H_TOP, h_bottom=H_INIT, scheme="arithmetic"):
    """Vertical soil column with fixed heads top and bottom."""
    fluid = fluid or FluidProps()
    vg_params = vg_params or VanGenuchtenParams(**SOIL)
    mesh = build_box_mesh(1, 1, n_cells, [(0, 0, -depth), (0.01, 0.01, 0.0)])
    K = permeability_from_conductivity(KS, fluid)
    material = Material(vg_params, np.full(mesh.n_cells, K))
    bcs = [BoundarySpec.zero_flux(p) for p in ("x-", "x+", "y-", "y+")]
    bcs += [BoundarySpec.fixed_head("z+", h_top), BoundarySpec.fixed_head("z-", h_bottom)]
    problem = RichardsProblem(mesh, material, fluid, bcs, scheme=scheme)
    h0 = CellField("h", np.full(mesh.n_cells, H_INIT))
    return problem, h0
