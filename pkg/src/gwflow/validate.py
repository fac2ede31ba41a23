"""Built-in validation: constitutive golden values and a column run
checked against a compact dense mixed-form reference.

The reference solver here is deliberately self-contained (its own
closure formulas, dense tridiagonal assembly, numpy solve) so a defect
in the production path cannot silently validate itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import (
    FluidProps,
    VanGenuchtenParams,
    permeability_from_conductivity,
    theta_of_h,
)
from .fields import BoundarySpec, CellField, Material
from .mesh import build_box_mesh
from .richards import PicardConfig, RichardsProblem

__all__ = ["ValidationCheck", "run_validation"]

# Celia-type benchmark soil, SI
ALPHA = 3.35          # 1/m
VG_N = 2.0
THETA_R = 0.102
THETA_S = 0.368
KS = 9.22e-5          # m/s
H_TOP = -0.75         # m
H_INIT = -10.0        # m

GOLDEN_THETA = (
    (-0.75, 0.20037, 5e-5),
    (-10.0, 0.10994, 5e-5),
    (-5.0, 0.118, 1e-3),
)


@dataclass
class ValidationCheck:
    name: str
    value: float
    limit: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.6g} (limit {self.limit:.3g})"


def _reference_column(n_cells, depth, dt, t_end, alpha, tol=1e-8, max_iter=400):
    """Dense mixed-form (modified Picard) reference on a 1D column."""
    m = 1.0 - 1.0 / VG_N
    dz = depth / n_cells

    def water_content(h):
        h = np.asarray(h, float)
        se = (1.0 + (alpha * np.abs(h)) ** VG_N) ** (-m)
        return np.where(h < 0, THETA_R + (THETA_S - THETA_R) * se, THETA_S)

    def conductivity(h):
        h = np.asarray(h, float)
        se = np.where(h < 0, (1.0 + (alpha * np.abs(h)) ** VG_N) ** (-m), 1.0)
        return KS * np.sqrt(se) * (1.0 - (1.0 - se ** (1.0 / m)) ** m) ** 2

    def capacity(h):
        h = np.asarray(h, float)
        x = (alpha * np.abs(h)) ** VG_N
        c = alpha * m * (THETA_S - THETA_R) / (1.0 - m) * (1.0 / (1.0 + x)) * (x / (1.0 + x)) ** m
        return np.where(h < 0, c, 0.0)

    h = np.full(n_cells, H_INIT)
    k_top = float(conductivity(H_TOP))
    k_bot = float(conductivity(H_INIT))
    idx = np.arange(n_cells)
    for _ in range(int(round(t_end / dt))):
        theta_old = water_content(h)
        h_m = h.copy()
        for _ in range(max_iter):
            k_cell = conductivity(h_m)
            k_face = 0.5 * (k_cell[:-1] + k_cell[1:])
            cap = capacity(h_m)
            theta_m = water_content(h_m)
            A = np.zeros((n_cells, n_cells))
            rhs = cap / dt * h_m - (theta_m - theta_old) / dt
            A[idx, idx] += cap / dt
            t_int = k_face / dz**2
            A[idx[:-1], idx[:-1]] += t_int
            A[idx[:-1], idx[1:]] -= t_int
            A[idx[1:], idx[1:]] += t_int
            A[idx[1:], idx[:-1]] -= t_int
            rhs[:-1] += t_int * dz
            rhs[1:] -= t_int * dz
            t_top = k_top / (0.5 * dz) / dz
            A[-1, -1] += t_top
            rhs[-1] += t_top * (H_TOP + 0.5 * dz)
            t_bot = k_bot / (0.5 * dz) / dz
            A[0, 0] += t_bot
            rhs[0] += t_bot * (H_INIT - 0.5 * dz)
            h_new = np.linalg.solve(A, rhs)
            change = float(np.max(np.abs(h_new - h_m)))
            h_m = h_new
            if change <= tol:
                break
        h = h_m
    return h


def _solver_column(n_cells, depth, dt, t_end, alpha):
    fluid = FluidProps()
    vg = VanGenuchtenParams(alpha=alpha, n=VG_N, theta_r=THETA_R, theta_s=THETA_S)
    mesh = build_box_mesh(1, 1, n_cells, [(0, 0, -depth), (0.01, 0.01, 0.0)])
    K = permeability_from_conductivity(KS, fluid)
    material = Material(vg, np.full(mesh.n_cells, K))
    bcs = [BoundarySpec.zero_flux(p) for p in ("x-", "x+", "y-", "y+")]
    bcs += [BoundarySpec.fixed_head("z+", H_TOP), BoundarySpec.fixed_head("z-", H_INIT)]
    problem = RichardsProblem(mesh, material, fluid, bcs)
    h = CellField("h", np.full(mesh.n_cells, H_INIT))
    cfg = PicardConfig(epsilon=1e-5)
    for _ in range(int(round(t_end / dt))):
        h, _ = problem.picard_step(h, dt, cfg)
    return h.values


def run_validation(alpha: float = ALPHA, head_tolerance_fraction: float = 0.02):
    """Golden constitutive checks plus the column-versus-reference run.

    A perturbed ``alpha`` is a negative control: it must make the checks
    fail.
    """
    vg = VanGenuchtenParams(alpha=alpha, n=VG_N, theta_r=THETA_R, theta_s=THETA_S)
    checks = []
    for head, expected, tol in GOLDEN_THETA:
        got = float(theta_of_h(head, vg))
        checks.append(ValidationCheck(
            name=f"theta(h={head:g} m) vs {expected}",
            value=abs(got - expected),
            limit=tol,
            passed=abs(got - expected) <= tol,
        ))

    h_solver = _solver_column(50, 1.0, 1.0, 360.0, alpha)
    h_reference = _reference_column(50, 1.0, 1.0, 360.0, alpha)
    head_range = abs(H_INIT - H_TOP)
    max_diff = float(np.max(np.abs(h_solver - h_reference)))
    checks.append(ValidationCheck(
        name="column head vs mixed-form reference (fraction of head range)",
        value=max_diff / head_range,
        limit=head_tolerance_fraction,
        passed=max_diff / head_range <= head_tolerance_fraction,
    ))
    return checks
