"""Two-point-flux assembly of the Picard-linearized head equation and the
outer nonlinear loop.

Each Picard iteration freezes the capillary capacity and face mobilities
at the previous head iterate, assembles the symmetric M-matrix

    V_c (C_c + C_min)/dt on the diagonal plus the face transmissibilities
    T_f = M_f |S_f| / d_f, off-diagonals -T_f,

and solves with Jacobi-CG. Gravity enters as the face-flux divergence of
M * g_hat written in total-head-difference form T_f (z_N - z_O), which
coincides with M_f g_hat.S_f on orthogonal meshes and keeps hydrostatic
equilibrium discretely exact on skewed ones.

Assembly is thread-parallel: a face pass computes per-face coefficients,
then a row pass writes each matrix row from exactly one thread.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numba as nb
import numpy as np

from .constitutive import FluidProps
from .fields import (
    FIXED_HEAD,
    CellField,
    Material,
    boundary_kr,
    update_secondary_fields,
)
from .linsolve import LinearSolveError, SparseSystem, all_finite, solve_cg
from .mesh import Mesh

__all__ = [
    "C_MIN",
    "PicardConfig",
    "StepReport",
    "RichardsProblem",
    "picard_residual",
    "mass_balance",
]

log = logging.getLogger(__name__)

# Diagonal floor [1/m] added to the assembled time term (not to the
# reported capacity field) so fully saturated cells, where C(h) = 0,
# keep the system non-singular.
C_MIN = 1e-9

# adjacency entry kinds for the row-assembly kernel
_ADJ_INTERIOR_OWNER = 0
_ADJ_INTERIOR_NEIGHBOR = 1
_ADJ_DIRICHLET = 2
_ADJ_FLUX = 3


@dataclass(frozen=True)
class PicardConfig:
    """Outer-iteration controls.

    ``epsilon`` is the head-change tolerance [m]; the loop accepts the
    current solution with a warning once ``hard_cap_factor * n_max_iter``
    iterations have run without convergence. ``relaxation`` damps the
    update (1 = plain Picard).
    """

    epsilon: float = 1e-5
    n_max_iter: int = 8
    hard_cap_factor: int = 2
    relaxation: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.n_max_iter < 1:
            raise ValueError(f"n_max_iter must be >= 1, got {self.n_max_iter}")
        if self.hard_cap_factor < 1:
            raise ValueError(f"hard_cap_factor must be >= 1, got {self.hard_cap_factor}")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError(f"relaxation must be in (0, 1], got {self.relaxation}")

    @property
    def hard_cap(self) -> int:
        return self.hard_cap_factor * self.n_max_iter


@dataclass
class StepReport:
    """Outcome of one time step."""

    n_iter: int
    residual_history: np.ndarray
    converged: bool
    warned: bool
    mass_balance_error: float
    linear_iterations: int = 0


def picard_residual(h_new, h_old) -> float:
    """max |h_new - h_old| over cells."""
    a = h_new.values if isinstance(h_new, CellField) else np.asarray(h_new, dtype=float)
    b = h_old.values if isinstance(h_old, CellField) else np.asarray(h_old, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"field size mismatch: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def mass_balance(mesh: Mesh, theta_before, theta_after, boundary_inflow: float, dt: float) -> float:
    """Relative defect between the storage change and the net boundary
    flux over one step:

        |delta(sum V theta) - dt * inflow| / max(|delta|, |dt inflow|, tiny)
    """
    delta = float(np.dot(mesh.cell_volumes, np.asarray(theta_after) - np.asarray(theta_before)))
    influx = dt * boundary_inflow
    scale = max(abs(delta), abs(influx), 1e-30)
    return abs(delta - influx) / scale


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@nb.njit(parallel=True, cache=True)
def _cell_closures_kernel(h, K, alpha, n, m, theta_r, theta_s, ell, coef,
                          theta, cap, kr, mob):
    """theta, C, k_r and total mobility per cell; coef = rho*|g|/mu.

    The generic exponents go through pow; the common n = 2 (m = 1/2)
    family uses multiply/sqrt, which is both faster and exactly rounded.
    """
    dth = theta_s - theta_r
    amp = alpha * m * dth / (1.0 - m)
    square_n = n == 2.0
    half_m = m == 0.5
    half_ell = ell == 0.5
    for c in nb.prange(h.shape[0]):
        hc = h[c]
        if hc < 0.0:
            ah = alpha * (-hc)
            x = ah * ah if square_n else ah ** n
            se_pow = 1.0 / (1.0 + x)  # = se**(1/m)
            se = np.sqrt(se_pow) if half_m else se_pow ** m
            one_minus = (1.0 - se_pow)
            omp_m = np.sqrt(one_minus) if half_m else one_minus ** m
            theta[c] = dth * se + theta_r
            cap[c] = amp * se_pow * omp_m
        else:
            se = 1.0
            omp_m = 0.0
            theta[c] = theta_s
            cap[c] = 0.0
        head = np.sqrt(se) if half_ell else se ** ell
        base = 1.0 - omp_m
        krc = head * base * base
        kr[c] = krc
        mob[c] = coef * K[c] * krc


@nb.njit(parallel=True, cache=True)
def _face_coeffs_kernel(h, z, K, kr, own, nbr, t_geom, dz, coef, upwind,
                        t_face, grav):
    """Interior-face transmissibility T_f = M_f |S|/d and gravity term
    T_f (z_N - z_O); M_f = coef * harmonic(K) * interpolated(k_r)."""
    for f in nb.prange(own.shape[0]):
        o = own[f]
        nn = nbr[f]
        k_f = 2.0 * K[o] * K[nn] / (K[o] + K[nn])
        if upwind:
            if h[o] + z[o] >= h[nn] + z[nn]:
                kr_f = kr[o]
            else:
                kr_f = kr[nn]
        else:
            kr_f = 0.5 * (kr[o] + kr[nn])
        t = coef * k_f * kr_f * t_geom[f]
        t_face[f] = t
        grav[f] = t * dz[f]


@nb.njit(parallel=True, cache=True)
def _row_assembly_kernel(adj_off, adj_kind, adj_fidx, adj_slot, diag_slot,
                         vc, h_old, t_face, grav, t_dir, rhs_dir, rhs_flux,
                         data, rhs):
    """Fill the CSR data and right-hand side, one cell row per thread."""
    for c in nb.prange(vc.shape[0]):
        diag = vc[c]
        acc = vc[c] * h_old[c]
        for e in range(adj_off[c], adj_off[c + 1]):
            kind = adj_kind[e]
            f = adj_fidx[e]
            if kind == 0:  # interior, this cell owns the face
                t = t_face[f]
                diag += t
                data[adj_slot[e]] = -t
                acc += grav[f]
            elif kind == 1:  # interior, neighbor side
                t = t_face[f]
                diag += t
                data[adj_slot[e]] = -t
                acc -= grav[f]
            elif kind == 2:  # fixed head
                diag += t_dir[f]
                acc += rhs_dir[f]
            else:  # fixed velocity / zero flux
                acc += rhs_flux[f]
        data[diag_slot[c]] = diag
        rhs[c] = acc


# ---------------------------------------------------------------------------
# problem setup
# ---------------------------------------------------------------------------

class RichardsProblem:
    """Immutable discrete operator for one mesh/material/BC combination.

    Construction precomputes the sparsity pattern, the geometric face
    factors and all boundary contributions that do not depend on the
    head iterate; :meth:`assemble` and :meth:`picard_step` then run the
    per-iteration kernels.
    """

    def __init__(
        self,
        mesh: Mesh,
        material: Material,
        fluid: FluidProps,
        bcs,
        scheme: str = "arithmetic",
        c_min: float = C_MIN,
    ):
        if scheme not in ("arithmetic", "upwind"):
            raise ValueError(f"unknown interpolation scheme {scheme!r}")
        if material.permeability.shape[0] != mesh.n_cells:
            raise ValueError("permeability field not sized to mesh")
        if isinstance(bcs, dict):
            bc_map = dict(bcs)
        else:
            bc_map = {bc.patch: bc for bc in bcs}
            if len(bc_map) != len(list(bcs)):
                raise ValueError("duplicate boundary spec for a patch")
        missing = set(mesh.patches) - set(bc_map)
        if missing:
            raise ValueError(f"patches without a boundary spec: {sorted(missing)}")
        extra = set(bc_map) - set(mesh.patches)
        if extra:
            raise ValueError(f"boundary specs for unknown patches: {sorted(extra)}")

        self.mesh = mesh
        self.material = material
        self.fluid = fluid
        self.bcs = bc_map
        self.scheme = scheme
        self.c_min = float(c_min)
        self._coef = fluid.rho * fluid.g_mag / fluid.mu

        n_int = mesh.n_internal
        own = mesh.owner[:n_int].astype(np.int64)
        nbr = mesh.neighbor.astype(np.int64)
        s_vec = mesh.face_area_vectors
        areas = np.linalg.norm(s_vec, axis=1)
        cc = mesh.cell_centroids

        delta = cc[nbr] - cc[own]
        d_proj = np.einsum("ij,ij->i", delta, s_vec[:n_int]) / np.where(
            areas[:n_int] > 0, areas[:n_int], 1.0
        )
        if np.any(d_proj <= 0):
            bad = int(np.argmin(d_proj))
            raise ValueError(
                f"face {bad}: non-positive owner-neighbor distance along the "
                f"face normal ({d_proj[bad]:.3e} m); mesh too skewed for TPFA"
            )
        self._own = own
        self._nbr = nbr
        self._t_geom = areas[:n_int] / d_proj
        self._dz = delta[:, 2].copy()
        self._z = cc[:, 2].copy()

        # boundary faces: fixed-head coefficients are head-independent
        # because k_r is evaluated at the prescribed head
        dir_faces, dir_owner, dir_t, dir_rhs, dir_dz, dir_head = [], [], [], [], [], []
        flux_faces, flux_owner, flux_rhs = [], [], []
        for name, faces in mesh.patches.items():
            bc = bc_map[name]
            f_own = mesh.owner[faces]
            if bc.kind == FIXED_HEAD:
                d_b = np.einsum(
                    "ij,ij->i", mesh.face_centroids[faces] - cc[f_own], s_vec[faces]
                ) / areas[faces]
                if np.any(d_b <= 0):
                    raise ValueError(
                        f"patch {name!r}: non-positive owner-to-face distance"
                    )
                kr_b = boundary_kr(bc, material)
                t_b = self._coef * material.permeability[f_own] * kr_b * areas[faces] / d_b
                dz_b = mesh.face_centroids[faces, 2] - cc[f_own, 2]
                dir_faces.append(faces)
                dir_owner.append(f_own)
                dir_t.append(t_b)
                dir_rhs.append(t_b * (bc.head + dz_b))
                dir_dz.append(dz_b)
                dir_head.append(np.full(faces.shape[0], bc.head))
            else:
                u_s = s_vec[faces] @ bc.velocity_vec
                flux_faces.append(faces)
                flux_owner.append(f_own)
                flux_rhs.append(-u_s)

        def _cat(parts, dtype=float):
            return (
                np.concatenate(parts).astype(dtype)
                if parts
                else np.empty(0, dtype=dtype)
            )

        self._dir_faces = _cat(dir_faces, np.int64)
        self._dir_owner = _cat(dir_owner, np.int64)
        self._dir_t = _cat(dir_t)
        self._dir_rhs = _cat(dir_rhs)
        self._dir_dz = _cat(dir_dz)
        self._dir_head = _cat(dir_head)
        self._flux_faces = _cat(flux_faces, np.int64)
        self._flux_owner = _cat(flux_owner, np.int64)
        self._flux_rhs = _cat(flux_rhs)

        self._build_pattern()

    def _build_pattern(self):
        n = self.mesh.n_cells
        n_int = self._own.shape[0]
        rows = np.concatenate([self._own, self._nbr, np.arange(n, dtype=np.int64)])
        cols = np.concatenate([self._nbr, self._own, np.arange(n, dtype=np.int64)])
        order = np.lexsort((cols, rows))
        slot_of = np.empty(order.shape[0], dtype=np.int64)
        slot_of[order] = np.arange(order.shape[0])

        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=self._indptr[1:])
        self._indices = cols[order].astype(np.int32)
        self._nnz = order.shape[0]
        self._diag_slot = slot_of[2 * n_int:]
        slot_owner_side = slot_of[:n_int]  # slot of A[owner, neighbor]
        slot_neighbor_side = slot_of[n_int:2 * n_int]  # slot of A[neighbor, owner]

        # cell -> (kind, face index, csr slot) adjacency, fixed order
        adj_cell = np.concatenate([
            self._own, self._nbr, self._dir_owner, self._flux_owner,
        ])
        adj_kind = np.concatenate([
            np.full(n_int, _ADJ_INTERIOR_OWNER, np.int8),
            np.full(n_int, _ADJ_INTERIOR_NEIGHBOR, np.int8),
            np.full(self._dir_owner.shape[0], _ADJ_DIRICHLET, np.int8),
            np.full(self._flux_owner.shape[0], _ADJ_FLUX, np.int8),
        ])
        adj_fidx = np.concatenate([
            np.arange(n_int, dtype=np.int64),
            np.arange(n_int, dtype=np.int64),
            np.arange(self._dir_owner.shape[0], dtype=np.int64),
            np.arange(self._flux_owner.shape[0], dtype=np.int64),
        ])
        adj_slot = np.concatenate([
            slot_owner_side, slot_neighbor_side,
            np.full(self._dir_owner.shape[0], -1, np.int64),
            np.full(self._flux_owner.shape[0], -1, np.int64),
        ])
        order2 = np.argsort(adj_cell, kind="stable")
        self._adj_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(adj_cell, minlength=n), out=self._adj_off[1:])
        self._adj_kind = adj_kind[order2]
        self._adj_fidx = adj_fidx[order2]
        self._adj_slot = adj_slot[order2]

        # reusable per-iteration buffers; the row kernel writes every slot,
        # so no zeroing is needed between assemblies
        self._theta = np.empty(n)
        self._cap = np.empty(n)
        self._kr = np.empty(n)
        self._mob = np.empty(n)
        self._t_face = np.empty(n_int)
        self._grav = np.empty(n_int)
        self._data = np.empty(self._nnz)
        self._rhs = np.empty(n)

    # -- per-iteration pieces ------------------------------------------------

    def cell_closures(self, h: np.ndarray):
        """theta, C, k_r and total mobility arrays at the given head."""
        n = h.shape[0]
        theta = np.empty(n)
        cap = np.empty(n)
        kr = np.empty(n)
        mob = np.empty(n)
        vg = self.material.vg
        _cell_closures_kernel(
            h, self.material.permeability, vg.alpha, vg.n, vg.m, vg.theta_r,
            vg.theta_s, self.material.kr_exponent, self._coef,
            theta, cap, kr, mob,
        )
        return theta, cap, kr, mob

    def assemble(self, h_prev_iter, h_old_time, dt: float) -> SparseSystem:
        """One Picard-linearized system with coefficients frozen at
        ``h_prev_iter`` and the time term against ``h_old_time``.

        The returned system aliases per-problem buffers and stays valid
        until the next assemble on this problem.
        """
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        h_m = h_prev_iter.values if isinstance(h_prev_iter, CellField) else np.asarray(h_prev_iter, float)
        h_n = h_old_time.values if isinstance(h_old_time, CellField) else np.asarray(h_old_time, float)
        mesh = self.mesh
        if h_m.shape[0] != mesh.n_cells or h_n.shape[0] != mesh.n_cells:
            raise ValueError("head fields not sized to mesh")

        vg = self.material.vg
        _cell_closures_kernel(
            h_m, self.material.permeability, vg.alpha, vg.n, vg.m, vg.theta_r,
            vg.theta_s, self.material.kr_exponent, self._coef,
            self._theta, self._cap, self._kr, self._mob,
        )
        _face_coeffs_kernel(
            h_m, self._z, self.material.permeability, self._kr, self._own, self._nbr,
            self._t_geom, self._dz, self._coef, self.scheme == "upwind",
            self._t_face, self._grav,
        )
        vc = mesh.cell_volumes * (self._cap + self.c_min) / dt

        _row_assembly_kernel(
            self._adj_off, self._adj_kind, self._adj_fidx, self._adj_slot,
            self._diag_slot, vc, h_n, self._t_face, self._grav,
            self._dir_t, self._dir_rhs, self._flux_rhs, self._data, self._rhs,
        )
        if not all_finite(self._data) or not all_finite(self._rhs):
            bad_rows = np.flatnonzero(~np.isfinite(self._rhs))
            if bad_rows.size == 0:
                ptr = np.searchsorted(
                    self._indptr, np.flatnonzero(~np.isfinite(self._data))[0], side="right"
                )
                bad_rows = [ptr - 1]
            raise ValueError(f"non-finite coefficient assembled in cell {int(bad_rows[0])}")
        return SparseSystem(self._indptr, self._indices, self._data, self._rhs, symmetric=True)

    def linear_tolerance(self, h_m: np.ndarray, epsilon: float) -> float:
        """Inner tolerance slaved to the Picard tolerance."""
        h_scale = max(float(np.max(np.abs(h_m))) if h_m.size else 0.0, 1.0)
        return min(1e-8, 1e-2 * epsilon / h_scale)

    def picard_step(self, h_old, dt: float, cfg: PicardConfig):
        """Advance one time step; returns (h_new, StepReport).

        Iterates from the initial guess h = h_old until the max-norm head
        change drops below epsilon, accepting the current solution with a
        warning after ``cfg.hard_cap`` iterations.
        """
        h_n = (h_old.values if isinstance(h_old, CellField) else np.asarray(h_old, float))
        name = h_old.name if isinstance(h_old, CellField) else "h"

        h_m = h_n.copy()
        theta_before = None
        history: list[float] = []
        linear_total = 0
        converged = False
        for it in range(1, cfg.hard_cap + 1):
            system = self.assemble(h_m, h_n, dt)
            if it == 1:
                # first iterate is h_old, so the assembled closures are
                # exactly the start-of-step state
                theta_before = self._theta.copy()
            rel_tol = self.linear_tolerance(h_m, cfg.epsilon)
            try:
                result = solve_cg(
                    system, x0=h_m, rel_tol=rel_tol,
                    max_iter=max(1000, 20 * self.mesh.n_cells),
                    check_finite=False,  # assemble just validated the entries
                )
            except LinearSolveError as exc:
                raise LinearSolveError(
                    f"Picard iteration {it} (dt={dt:g} s): {exc}", exc.history
                ) from exc
            linear_total += result.n_iter
            if cfg.relaxation != 1.0:
                h_next = h_m + cfg.relaxation * (result.x - h_m)
            else:
                h_next = result.x
            resid = picard_residual(h_next, h_m)
            history.append(resid)
            h_m = h_next
            if resid <= cfg.epsilon:
                converged = True
                break

        warned = not converged
        if warned:
            log.warning(
                "Picard loop hit the hard cap (%d iterations, dt=%g s, "
                "residual %.3e m > epsilon %.3e m); accepting current solution",
                cfg.hard_cap, dt, history[-1], cfg.epsilon,
            )

        vg = self.material.vg
        _cell_closures_kernel(
            h_m, self.material.permeability, vg.alpha, vg.n, vg.m, vg.theta_r,
            vg.theta_s, self.material.kr_exponent, self._coef,
            self._theta, self._cap, self._kr, self._mob,
        )
        mbe = mass_balance(
            self.mesh, theta_before, self._theta, self.boundary_inflow(h_m), dt
        )
        report = StepReport(
            n_iter=len(history),
            residual_history=np.array(history),
            converged=converged,
            warned=warned,
            mass_balance_error=mbe,
            linear_iterations=linear_total,
        )
        return CellField(name, h_m), report

    def boundary_inflow(self, h) -> float:
        """Net volumetric inflow through all boundary faces [m^3/s] at the
        given head field (fixed_velocity faces contribute exactly -U.S)."""
        h_v = h.values if isinstance(h, CellField) else np.asarray(h, float)
        total = float(self._flux_rhs.sum())
        if self._dir_faces.size:
            total += float(
                np.sum(self._dir_t * (self._dir_head - h_v[self._dir_owner] + self._dir_dz))
            )
        return total

    def secondary_fields(self, h):
        """Numpy-facing closure update (same contract as fields module)."""
        return update_secondary_fields(h, self.material, self.fluid)
