"""Cell fields, material data and boundary-condition evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import (
    DEFAULT_PORE_EXPONENT,
    FluidProps,
    VanGenuchtenParams,
    capillary_capacity,
    effective_saturation,
    kr_of_thetae,
    theta_of_h,
)
from .mesh import Mesh

__all__ = [
    "CellField",
    "BoundarySpec",
    "Material",
    "SecondaryFields",
    "update_secondary_fields",
    "face_mobility",
    "boundary_head_gradient",
]

FIXED_HEAD = "fixed_head"
FIXED_VELOCITY = "fixed_velocity"
ZERO_FLUX = "zero_flux"


@dataclass
class CellField:
    """Named per-cell scalar field."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError(f"field {self.name!r} must be one value per cell")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"field {self.name!r} contains non-finite values")

    def check_sized(self, mesh: Mesh) -> "CellField":
        if self.values.shape[0] != mesh.n_cells:
            raise ValueError(
                f"field {self.name!r} has {self.values.shape[0]} values for a "
                f"{mesh.n_cells}-cell mesh"
            )
        return self


@dataclass(frozen=True)
class BoundarySpec:
    """Condition on one boundary patch.

    ``fixed_head`` prescribes the pressure head (m), ``fixed_velocity``
    a Darcy velocity vector (m/s). ``zero_flux`` is fixed_velocity with
    U = 0, so one code path covers both (the gravity term is balanced,
    giving true no-flow).
    """

    patch: str
    kind: str
    head: float = 0.0
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in (FIXED_HEAD, FIXED_VELOCITY, ZERO_FLUX):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        object.__setattr__(self, "velocity", tuple(float(c) for c in self.velocity))
        if not all(np.isfinite(self.velocity)) or not np.isfinite(self.head):
            raise ValueError(f"boundary spec on {self.patch!r} has non-finite values")

    @classmethod
    def fixed_head(cls, patch: str, value: float) -> "BoundarySpec":
        return cls(patch, FIXED_HEAD, head=float(value))

    @classmethod
    def fixed_velocity(cls, patch: str, velocity) -> "BoundarySpec":
        return cls(patch, FIXED_VELOCITY, velocity=tuple(velocity))

    @classmethod
    def zero_flux(cls, patch: str) -> "BoundarySpec":
        return cls(patch, ZERO_FLUX)

    @property
    def velocity_vec(self) -> np.ndarray:
        if self.kind == FIXED_HEAD:
            raise ValueError(f"fixed_head patch {self.patch!r} has no velocity")
        return np.array(self.velocity, dtype=float)


@dataclass(frozen=True)
class Material:
    """Van Genuchten parameters plus the (possibly heterogeneous)
    intrinsic permeability field [m^2]."""

    vg: VanGenuchtenParams
    permeability: np.ndarray
    kr_exponent: float = DEFAULT_PORE_EXPONENT

    def __post_init__(self):
        perm = np.asarray(self.permeability, dtype=float)
        if np.any(perm <= 0) or not np.all(np.isfinite(perm)):
            raise ValueError("permeability must be positive and finite everywhere")
        object.__setattr__(self, "permeability", perm)


@dataclass
class SecondaryFields:
    """Pointwise closures evaluated from a head field."""

    theta: np.ndarray
    capacity: np.ndarray
    kr: np.ndarray
    mobility_phase: np.ndarray
    mobility_total: np.ndarray


def update_secondary_fields(h, material: Material, fluid: FluidProps) -> SecondaryFields:
    """Evaluate theta, C, k_r, M_theta and M from the head field."""
    values = h.values if isinstance(h, CellField) else np.asarray(h, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("head field contains non-finite values")
    theta = theta_of_h(values, material.vg)
    cap = capillary_capacity(values, material.vg)
    kr = kr_of_thetae(
        effective_saturation(theta, material.vg), material.vg, material.kr_exponent
    )
    m_phase = material.permeability * kr / fluid.mu
    m_total = m_phase * fluid.rho * fluid.g_mag
    return SecondaryFields(theta, cap, kr, m_phase, m_total)


def boundary_kr(bc: BoundarySpec, material: Material) -> float:
    """Relative permeability used on a fixed_head patch: evaluated at the
    prescribed head so the imposed condition stays consistent with the
    closure."""
    theta_b = theta_of_h(bc.head, material.vg)
    return float(
        kr_of_thetae(
            effective_saturation(theta_b, material.vg), material.vg, material.kr_exponent
        )
    )


def face_mobility(
    mesh: Mesh,
    h,
    material: Material,
    fluid: FluidProps,
    bcs: dict[str, BoundarySpec],
    scheme: str = "arithmetic",
    kr: np.ndarray | None = None,
) -> np.ndarray:
    """Total mobility M (m/s) on every face.

    Interior faces combine the harmonic mean of the intrinsic
    permeability with scheme-interpolated k_r (``arithmetic`` or
    ``upwind`` by total head). Boundary faces use the adjacent cell;
    fixed_head patches evaluate k_r at the prescribed head.
    """
    if scheme not in ("arithmetic", "upwind"):
        raise ValueError(f"unknown interpolation scheme {scheme!r}")
    hv = (h.values if isinstance(h, CellField) else np.asarray(h, dtype=float))
    if hv.shape[0] != mesh.n_cells:
        raise ValueError("head field not sized to mesh")
    if kr is None:
        theta = theta_of_h(hv, material.vg)
        kr = kr_of_thetae(
            effective_saturation(theta, material.vg), material.vg, material.kr_exponent
        )
    K = material.permeability
    coef = fluid.rho * fluid.g_mag / fluid.mu

    own = mesh.owner
    nbr = mesh.neighbor
    n_int = mesh.n_internal
    m_face = np.empty(mesh.n_faces)

    Ko, Kn = K[own[:n_int]], K[nbr]
    K_f = 2.0 * Ko * Kn / (Ko + Kn)
    if scheme == "arithmetic":
        kr_f = 0.5 * (kr[own[:n_int]] + kr[nbr])
    else:
        H = hv + mesh.cell_centroids[:, 2]
        from_owner = H[own[:n_int]] >= H[nbr]
        kr_f = np.where(from_owner, kr[own[:n_int]], kr[nbr])
    m_face[:n_int] = coef * K_f * kr_f

    bnd_own = own[n_int:]
    m_face[n_int:] = coef * K[bnd_own] * kr[bnd_own]
    for name, faces in mesh.patches.items():
        bc = bcs.get(name)
        if bc is not None and bc.kind == FIXED_HEAD:
            m_face[faces] = coef * K[own[faces]] * boundary_kr(bc, material)
    return m_face


def boundary_head_gradient(
    bc: BoundarySpec, normals: np.ndarray, m_face: np.ndarray, fluid: FluidProps
) -> np.ndarray:
    """Head gradient along the outward normal that makes the discrete
    face flux reproduce the prescribed Darcy velocity:

        dh/dn = g_hat . n - (U . n) / M_f

    derived from U = -M grad(h) + M g_hat.
    """
    if bc.kind == FIXED_HEAD:
        raise ValueError(f"patch {bc.patch!r} is fixed_head, not a velocity condition")
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    m_face = np.atleast_1d(np.asarray(m_face, dtype=float))
    u_n = normals @ bc.velocity_vec
    dead = m_face <= 0.0
    if np.any(dead & (u_n != 0.0)):
        raise ValueError(
            f"patch {bc.patch!r}: cannot impose flow through a face with zero mobility"
        )
    g_n = normals @ fluid.g_hat
    out = np.where(dead, g_n, g_n - u_n / np.where(dead, 1.0, m_face))
    return out
