"""Cell/face meshes for two-point-flux finite volumes.

A mesh stores points, cells (tetrahedra, hexahedra, wedges), the faces
reconstructed from them, owner/neighbor topology and the geometric data
the assembly needs. Faces are stored interior-first; boundary faces are
grouped into named patches. Meshes are immutable after construction and
safe to share read-only across threads.

Quad faces are treated as bilinear patches: cell volumes and centroids
are obtained from the divergence theorem with a 2x2 Gauss rule that is
exact for bilinear geometry, so uniform refinement preserves the total
volume to roundoff even for warped (terrain) hexahedra.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

__all__ = [
    "CellKind",
    "PatchRule",
    "Mesh",
    "build_box_mesh",
    "refine_uniform",
    "synth_terrain_mesh",
    "TerrainSurface",
    "mesh_summary",
]


class CellKind(IntEnum):
    """Supported cell types, valued by their legacy-VTK type codes."""

    TETRAHEDRON = 10
    HEXAHEDRON = 12
    WEDGE = 13


NODES_PER_KIND = {
    CellKind.TETRAHEDRON: 4,
    CellKind.HEXAHEDRON: 8,
    CellKind.WEDGE: 6,
}

# Outward-oriented face loops in local node numbering (orientation is
# re-checked geometrically, so imported meshes with unusual node order
# still come out owner-outward).
FACE_TEMPLATES = {
    CellKind.TETRAHEDRON: ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)),
    CellKind.HEXAHEDRON: (
        (0, 3, 2, 1),
        (4, 5, 6, 7),
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ),
    CellKind.WEDGE: ((0, 2, 1), (3, 4, 5), (0, 1, 4, 3), (1, 2, 5, 4), (2, 0, 3, 5)),
}

# Hex edges and faces in local numbering, used by uniform refinement.
_HEX_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
)
_HEX_QUADS = FACE_TEMPLATES[CellKind.HEXAHEDRON]

# Local corner -> (i, j, k) on the 3x3x3 refinement lattice (units of 2).
_HEX_CORNER_IJK = (
    (0, 0, 0), (2, 0, 0), (2, 2, 0), (0, 2, 0),
    (0, 0, 2), (2, 0, 2), (2, 2, 2), (0, 2, 2),
)

DEFAULT_PATCH = "boundary"


@dataclass(frozen=True)
class PatchRule:
    """One boundary-patch selector.

    Either an axis-aligned plane (faces whose centroid lies within tol
    of coordinate ``value`` on ``axis``) or ``remaining`` which collects
    every not-yet-assigned boundary face.
    """

    name: str
    kind: str  # "plane" | "remaining"
    axis: str = "z"
    value: float = 0.0
    tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in ("plane", "remaining"):
            raise ValueError(f"unknown patch rule kind {self.kind!r}")
        if self.kind == "plane" and self.axis not in ("x", "y", "z"):
            raise ValueError(f"patch rule axis must be x, y or z, got {self.axis!r}")


@dataclass(frozen=True)
class Mesh:
    """Immutable cell/face mesh.

    ``faces[0:n_internal]`` are interior (owner < neighbor), the rest are
    boundary faces; every boundary face belongs to exactly one patch.
    Face area vectors point outward from the owner cell. Elevation z is
    the third component of ``cell_centroids``.
    """

    points: np.ndarray  # (n_points, 3) float64
    cell_kinds: np.ndarray  # (n_cells,) uint8, VTK codes
    cell_offsets: np.ndarray  # (n_cells + 1,) int64
    cell_conn: np.ndarray  # flat point indices
    face_offsets: np.ndarray  # (n_faces + 1,) int64
    face_conn: np.ndarray  # flat point-index loops
    owner: np.ndarray  # (n_faces,) int64
    neighbor: np.ndarray  # (n_internal,) int64
    n_internal: int
    patches: dict[str, np.ndarray]  # patch name -> boundary face indices
    cell_centroids: np.ndarray  # (n_cells, 3)
    cell_volumes: np.ndarray  # (n_cells,)
    face_centroids: np.ndarray  # (n_faces, 3)
    face_area_vectors: np.ndarray  # (n_faces, 3), outward from owner

    def __post_init__(self):
        for arr in (
            self.points, self.cell_kinds, self.cell_offsets, self.cell_conn,
            self.face_offsets, self.face_conn, self.owner, self.neighbor,
            self.cell_centroids, self.cell_volumes, self.face_centroids,
            self.face_area_vectors,
        ):
            arr.flags.writeable = False
        for idx in self.patches.values():
            idx.flags.writeable = False

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_kinds.shape[0]

    @property
    def n_faces(self) -> int:
        return self.owner.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.n_faces - self.n_internal

    def cell_nodes(self, i: int) -> np.ndarray:
        return self.cell_conn[self.cell_offsets[i]:self.cell_offsets[i + 1]]

    def face_nodes(self, f: int) -> np.ndarray:
        return self.face_conn[self.face_offsets[f]:self.face_offsets[f + 1]]

    def face_areas(self) -> np.ndarray:
        return np.linalg.norm(self.face_area_vectors, axis=1)

    def patch_of_boundary_face(self) -> dict[int, str]:
        out: dict[int, str] = {}
        for name, idx in self.patches.items():
            for f in idx:
                out[int(f)] = name
        return out

    def check_closure(self, rel_tol: float = 1e-10) -> float:
        """Max closure defect |sum of outward face area vectors| over the
        cell surface area; raises if above rel_tol."""
        acc = np.zeros((self.n_cells, 3))
        np.add.at(acc, self.owner, self.face_area_vectors)
        np.add.at(acc, self.neighbor, -self.face_area_vectors[: self.n_internal])
        areas = np.zeros(self.n_cells)
        np.add.at(areas, self.owner, self.face_areas())
        np.add.at(areas, self.neighbor, self.face_areas()[: self.n_internal])
        defect = np.linalg.norm(acc, axis=1) / areas
        worst = float(defect.max())
        if worst > rel_tol:
            bad = int(defect.argmax())
            raise ValueError(f"cell {bad} is not closed: relative defect {worst:.3e}")
        return worst


# ---------------------------------------------------------------------------
# Face geometry
# ---------------------------------------------------------------------------

_GAUSS_1D = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def _tri_geometry(v0, v1, v2):
    """Area vector, centroid, and divergence-theorem integrals of planar
    triangles. Returns (S, centroid, I, J) with I = int x.n dS and
    J_i = int x_i^2 n_i dS."""
    area_vec = 0.5 * np.cross(v1 - v0, v2 - v0)
    centroid = (v0 + v1 + v2) / 3.0
    flux = np.einsum("ij,ij->i", centroid, area_vec)
    # edge-midpoint rule, exact for quadratics on planar triangles
    m01, m12, m20 = (v0 + v1) / 2.0, (v1 + v2) / 2.0, (v2 + v0) / 2.0
    sq = (m01 * m01 + m12 * m12 + m20 * m20) / 3.0
    moment = sq * area_vec
    return area_vec, centroid, flux, moment


def _quad_geometry(v0, v1, v2, v3):
    """Same as :func:`_tri_geometry` for bilinear quad patches; the 2x2
    Gauss rule is exact for the bilinear surface."""
    area_vec = np.zeros_like(v0)
    flux = np.zeros(v0.shape[0])
    moment = np.zeros_like(v0)
    for gu in _GAUSS_1D:
        for gv in _GAUSS_1D:
            x = (
                v0 * (1 - gu) * (1 - gv)
                + v1 * gu * (1 - gv)
                + v2 * gu * gv
                + v3 * (1 - gu) * gv
            )
            xu = (v1 - v0) * (1 - gv) + (v2 - v3) * gv
            xv = (v3 - v0) * (1 - gu) + (v2 - v1) * gu
            ndS = 0.25 * np.cross(xu, xv)
            area_vec += ndS
            flux += np.einsum("ij,ij->i", x, ndS)
            moment += x * x * ndS
    # area-weighted fan centroid (exact for planar quads)
    vm = (v0 + v1 + v2 + v3) / 4.0
    csum = np.zeros_like(v0)
    asum = np.zeros(v0.shape[0])
    for a, b in ((v0, v1), (v1, v2), (v2, v3), (v3, v0)):
        tvec = 0.5 * np.cross(b - a, vm - a)
        tarea = np.linalg.norm(tvec, axis=1)
        csum += tarea[:, None] * (a + b + vm) / 3.0
        asum += tarea
    centroid = np.where(asum[:, None] > 0, csum / np.maximum(asum, 1e-300)[:, None], vm)
    return area_vec, centroid, flux, moment


# ---------------------------------------------------------------------------
# Mesh construction from cells
# ---------------------------------------------------------------------------

def _cells_by_kind(kinds, offsets, conn):
    for kind in (CellKind.TETRAHEDRON, CellKind.HEXAHEDRON, CellKind.WEDGE):
        sel = np.flatnonzero(kinds == int(kind))
        if sel.size:
            npc = NODES_PER_KIND[kind]
            rows = conn[offsets[sel][:, None] + np.arange(npc)]
            yield kind, sel, rows


def _candidate_faces(kinds, offsets, conn):
    """All template faces of all cells: padded loops, lengths, cell ids."""
    loops, lens, cells = [], [], []
    for kind, sel, rows in _cells_by_kind(kinds, offsets, conn):
        for tmpl in FACE_TEMPLATES[kind]:
            face = rows[:, list(tmpl)]
            if face.shape[1] < 4:
                pad = np.full((face.shape[0], 4 - face.shape[1]), -1, dtype=face.dtype)
                face = np.hstack([face, pad])
            loops.append(face)
            lens.append(np.full(face.shape[0], len(tmpl), dtype=np.int8))
            cells.append(sel)
    return np.vstack(loops), np.concatenate(lens), np.concatenate(cells)


def build_mesh_from_cells(
    points: np.ndarray,
    kinds: np.ndarray,
    offsets: np.ndarray,
    conn: np.ndarray,
    patch_rules: Sequence[PatchRule] | None = None,
) -> Mesh:
    """Reconstruct faces by matching shared point sets between cells and
    assemble the full mesh. Boundary faces not claimed by any rule end up
    in the ``boundary`` patch."""
    points = np.ascontiguousarray(points, dtype=float)
    kinds = np.asarray(kinds, dtype=np.uint8)
    offsets = np.asarray(offsets, dtype=np.int64)
    conn = np.asarray(conn, dtype=np.int64)
    n_cells = kinds.shape[0]
    if n_cells == 0:
        raise ValueError("mesh has no cells")
    if conn.size and (conn.min() < 0 or conn.max() >= points.shape[0]):
        raise ValueError("cell connectivity references points out of range")

    loops, lens, cand_cell = _candidate_faces(kinds, offsets, conn)
    keys = np.sort(loops, axis=1)
    order = np.lexsort((keys[:, 3], keys[:, 2], keys[:, 1], keys[:, 0]))
    keys_sorted = keys[order]
    new_run = np.ones(order.shape[0], dtype=bool)
    new_run[1:] = np.any(keys_sorted[1:] != keys_sorted[:-1], axis=1)
    run_id = np.cumsum(new_run) - 1
    counts = np.bincount(run_id)
    if counts.max(initial=0) > 2:
        bad = order[np.searchsorted(run_id, int(np.argmax(counts > 2)))]
        raise ValueError(
            f"face {sorted(int(i) for i in loops[bad][loops[bad] >= 0])} is shared "
            f"by more than two cells (non-manifold mesh)"
        )
    run_start = np.flatnonzero(new_run)

    interior_runs = run_start[counts == 2]
    boundary_runs = run_start[counts == 1]

    ia = order[interior_runs]
    ib = order[interior_runs + 1]
    ca, cb = cand_cell[ia], cand_cell[ib]
    own_is_a = ca < cb
    own_cand = np.where(own_is_a, ia, ib)
    int_owner = np.where(own_is_a, ca, cb)
    int_neigh = np.where(own_is_a, cb, ca)

    bnd_cand = order[boundary_runs]
    bnd_owner = cand_cell[bnd_cand]

    # deterministic face ordering: interior by (owner, neighbor), then
    # boundary by (owner, sorted point key)
    if int_owner.size:
        io = np.lexsort((int_neigh, int_owner))
        own_cand, int_owner, int_neigh = own_cand[io], int_owner[io], int_neigh[io]
    if bnd_owner.size:
        bkeys = keys[bnd_cand]
        bo = np.lexsort((bkeys[:, 3], bkeys[:, 2], bkeys[:, 1], bkeys[:, 0], bnd_owner))
        bnd_cand, bnd_owner = bnd_cand[bo], bnd_owner[bo]

    face_cand = np.concatenate([own_cand, bnd_cand])
    face_loops = loops[face_cand]
    face_lens = lens[face_cand].astype(np.int64)
    owner = np.concatenate([int_owner, bnd_owner])
    n_internal = int(int_owner.size)

    # rough cell centers (node means) for the outward-orientation check
    rough = np.zeros((n_cells, 3))
    for kind, sel, rows in _cells_by_kind(kinds, offsets, conn):
        rough[sel] = points[rows].mean(axis=1)

    n_faces = face_loops.shape[0]
    area_vec = np.zeros((n_faces, 3))
    centroid = np.zeros((n_faces, 3))
    flux = np.zeros(n_faces)
    moment = np.zeros((n_faces, 3))

    tri = face_lens == 3
    quad = face_lens == 4
    if np.any(tri):
        tl = face_loops[tri]
        area_vec[tri], centroid[tri], flux[tri], moment[tri] = _tri_geometry(
            points[tl[:, 0]], points[tl[:, 1]], points[tl[:, 2]]
        )
    if np.any(quad):
        ql = face_loops[quad]
        area_vec[quad], centroid[quad], flux[quad], moment[quad] = _quad_geometry(
            points[ql[:, 0]], points[ql[:, 1]], points[ql[:, 2]], points[ql[:, 3]]
        )

    outward = np.einsum("ij,ij->i", area_vec, centroid - rough[owner])
    flip = outward < 0
    if np.any(flip):
        area_vec[flip] *= -1.0
        flux[flip] *= -1.0
        moment[flip] *= -1.0
        # reversing the loop (first node kept) flips the orientation
        tri_flip = flip & tri
        quad_flip = flip & quad
        if np.any(tri_flip):
            face_loops[np.ix_(np.flatnonzero(tri_flip), [1, 2])] = face_loops[
                np.ix_(np.flatnonzero(tri_flip), [2, 1])
            ]
        if np.any(quad_flip):
            face_loops[np.ix_(np.flatnonzero(quad_flip), [1, 2, 3])] = face_loops[
                np.ix_(np.flatnonzero(quad_flip), [3, 2, 1])
            ]

    # volumes & centroids via the divergence theorem
    vol3 = np.zeros(n_cells)
    np.add.at(vol3, owner, flux)
    np.add.at(vol3, int_neigh, -flux[:n_internal])
    volumes = vol3 / 3.0
    if np.any(volumes <= 0):
        bad = int(np.argmin(volumes))
        raise ValueError(f"cell {bad} has non-positive volume {volumes[bad]:.3e}")
    mom = np.zeros((n_cells, 3))
    np.add.at(mom, owner, moment)
    np.add.at(mom, int_neigh, -moment[:n_internal])
    centroids = mom / (2.0 * volumes[:, None])

    # patch assignment on boundary faces
    rules = list(patch_rules) if patch_rules else []
    if not rules:
        rules = [PatchRule(DEFAULT_PATCH, "remaining")]
    n_bnd = n_faces - n_internal
    bc = centroid[n_internal:]
    assigned = np.full(n_bnd, -1, dtype=np.int64)
    names: list[str] = []
    for rule in rules:
        if rule.name in names:
            ridx = names.index(rule.name)
        else:
            names.append(rule.name)
            ridx = len(names) - 1
        free = assigned < 0
        if rule.kind == "plane":
            ax = "xyz".index(rule.axis)
            hit = free & (np.abs(bc[:, ax] - rule.value) <= rule.tol)
        else:
            hit = free
        assigned[hit] = ridx
    if np.any(assigned < 0):
        if DEFAULT_PATCH in names:
            ridx = names.index(DEFAULT_PATCH)
        else:
            names.append(DEFAULT_PATCH)
            ridx = len(names) - 1
        assigned[assigned < 0] = ridx
    patches = {
        name: (np.flatnonzero(assigned == i) + n_internal)
        for i, name in enumerate(names)
        if np.any(assigned == i)
    }

    face_offsets = np.zeros(n_faces + 1, dtype=np.int64)
    face_offsets[1:] = np.cumsum(face_lens)
    face_conn = _flatten_loops(face_loops, face_lens)

    neighbor = int_neigh.astype(np.int64)
    return Mesh(
        points=points,
        cell_kinds=kinds,
        cell_offsets=offsets.copy(),
        cell_conn=conn.copy(),
        face_offsets=face_offsets,
        face_conn=face_conn.astype(np.int64),
        owner=owner.astype(np.int64),
        neighbor=neighbor,
        n_internal=n_internal,
        patches=patches,
        cell_centroids=centroids,
        cell_volumes=volumes,
        face_centroids=centroid,
        face_area_vectors=area_vec,
    )


def _flatten_loops(face_loops, face_lens):
    n = int(face_lens.sum())
    out = np.empty(n, dtype=np.int64)
    pos = np.zeros(face_lens.shape[0] + 1, dtype=np.int64)
    np.cumsum(face_lens, out=pos[1:])
    mask = np.arange(4) < face_lens[:, None]
    out[:] = face_loops[mask]
    return out


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _hex_grid_cells(nx, ny, nz):
    """VTK-ordered hex connectivity for an (nx, ny, nz) structured grid of
    points indexed i + j*(nx+1) + k*(nx+1)*(ny+1)."""
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = i.ravel(order="F"), j.ravel(order="F"), k.ravel(order="F")

    def pid(ii, jj, kk):
        return ii + jj * (nx + 1) + kk * (nx + 1) * (ny + 1)

    conn = np.column_stack([
        pid(i, j, k), pid(i + 1, j, k), pid(i + 1, j + 1, k), pid(i, j + 1, k),
        pid(i, j, k + 1), pid(i + 1, j, k + 1), pid(i + 1, j + 1, k + 1), pid(i, j + 1, k + 1),
    ])
    return conn.astype(np.int64)


def _box_patch_rules(x0, x1, y0, y1, z0, z1, top_name="z+", bottom_name="z-"):
    span = max(x1 - x0, y1 - y0, z1 - z0)
    tol = 1e-9 * span
    return [
        PatchRule("x-", "plane", "x", x0, tol),
        PatchRule("x+", "plane", "x", x1, tol),
        PatchRule("y-", "plane", "y", y0, tol),
        PatchRule("y+", "plane", "y", y1, tol),
        PatchRule(bottom_name, "plane", "z", z0, tol),
        PatchRule(top_name, "plane", "z", z1, tol),
    ]


def build_box_mesh(nx: int, ny: int, nz: int, bounds) -> Mesh:
    """Axis-aligned hexahedral box with patches x-, x+, y-, y+, z-, z+.

    ``bounds`` is a pair of opposite corner points in metres, strictly
    ordered per axis.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError(f"cell counts must be >= 1, got ({nx}, {ny}, {nz})")
    (x0, y0, z0), (x1, y1, z1) = (tuple(map(float, c)) for c in bounds)
    for lo, hi, ax in ((x0, x1, "x"), (y0, y1, "y"), (z0, z1, "z")):
        if not hi > lo:
            raise ValueError(
                f"degenerate bounds on {ax}: [{lo}, {hi}] has non-positive extent"
            )
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    zs = np.linspace(z0, z1, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    points = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])
    conn = _hex_grid_cells(nx, ny, nz)
    n_cells = conn.shape[0]
    kinds = np.full(n_cells, int(CellKind.HEXAHEDRON), dtype=np.uint8)
    offsets = np.arange(n_cells + 1, dtype=np.int64) * 8
    return build_mesh_from_cells(
        points, kinds, offsets, conn.ravel(),
        _box_patch_rules(x0, x1, y0, y1, z0, z1),
    )


@dataclass(frozen=True)
class TerrainSurface:
    """Serializable height function for synthetic terrain meshes.

    ``flat``: constant ``base``. ``sine``: base + amplitude * sin waves
    with ``waves_x`` / ``waves_y`` full periods across the domain.
    """

    kind: str = "flat"
    base: float = 1.0
    amplitude: float = 0.0
    waves_x: float = 1.0
    waves_y: float = 1.0

    def __post_init__(self):
        if self.kind not in ("flat", "sine"):
            raise ValueError(f"unknown surface kind {self.kind!r}")

    def heights(self, x, y, extent) -> np.ndarray:
        (x0, y0), (x1, y1) = extent
        if self.kind == "flat":
            return np.full(np.broadcast(x, y).shape, float(self.base))
        u = (np.asarray(x) - x0) / (x1 - x0)
        v = (np.asarray(y) - y0) / (y1 - y0)
        return self.base + 0.5 * self.amplitude * (
            np.sin(2 * np.pi * self.waves_x * u) + np.sin(2 * np.pi * self.waves_y * v)
        )


def synth_terrain_mesh(
    nx: int,
    ny: int,
    nz: int,
    surface,
    depth: float,
    bounds_xy=((0.0, 0.0), (1.0, 1.0)),
) -> Mesh:
    """Columnar hexahedral mesh between the plane z = -depth and a height
    function sampled at grid nodes; node columns are graded linearly.

    ``surface`` is either a :class:`TerrainSurface` or a vectorized
    callable (x, y) -> height. Heights must be strictly positive. The
    irregular top is the patch ``top``; the flat bottom is ``bottom``,
    the sides are x-/x+/y-/y+.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError(f"cell counts must be >= 1, got ({nx}, {ny}, {nz})")
    depth = float(depth)
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    (x0, y0), (x1, y1) = bounds_xy
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate xy bounds for terrain mesh")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if isinstance(surface, TerrainSurface):
        H = surface.heights(X, Y, bounds_xy)
    else:
        H = np.asarray(surface(X, Y), dtype=float)
    if np.any(H <= 0):
        raise ValueError(
            f"terrain surface must be strictly positive, min height {H.min():.6g}"
        )
    n_layer = (nx + 1) * (ny + 1)
    points = np.empty(((nz + 1) * n_layer, 3))
    xy = np.column_stack([X.ravel(order="F"), Y.ravel(order="F")])
    h_flat = H.ravel(order="F")
    for l in range(nz + 1):
        frac = l / nz
        layer = slice(l * n_layer, (l + 1) * n_layer)
        points[layer, :2] = xy
        points[layer, 2] = -depth + frac * (h_flat + depth)
    conn = _hex_grid_cells(nx, ny, nz)
    n_cells = conn.shape[0]
    kinds = np.full(n_cells, int(CellKind.HEXAHEDRON), dtype=np.uint8)
    offsets = np.arange(n_cells + 1, dtype=np.int64) * 8
    span = max(x1 - x0, y1 - y0)
    tol = 1e-9 * span
    rules = [
        PatchRule("x-", "plane", "x", x0, tol),
        PatchRule("x+", "plane", "x", x1, tol),
        PatchRule("y-", "plane", "y", y0, tol),
        PatchRule("y+", "plane", "y", y1, tol),
        PatchRule("bottom", "plane", "z", -depth, tol + 1e-9 * depth),
        PatchRule("top", "remaining"),
    ]
    return build_mesh_from_cells(points, kinds, offsets, conn.ravel(), rules)


# ---------------------------------------------------------------------------
# Uniform refinement
# ---------------------------------------------------------------------------

def _void_view(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows)
    return rows.view([("", rows.dtype)] * rows.shape[1]).ravel()


def refine_uniform(mesh: Mesh, levels: int) -> Mesh:
    """Split every hexahedron 2x2x2 per level; boundary patches are
    inherited from the parent faces. Total volume is preserved to
    roundoff because child faces are exact restrictions of the parent
    bilinear faces."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if np.any(mesh.cell_kinds != int(CellKind.HEXAHEDRON)):
        bad = int(np.argmax(mesh.cell_kinds != int(CellKind.HEXAHEDRON)))
        raise ValueError(
            f"refine_uniform requires an all-hexahedral mesh; cell {bad} has "
            f"VTK type {int(mesh.cell_kinds[bad])}"
        )
    out = mesh
    for _ in range(levels):
        out = _refine_once(out)
    return out


def _refine_once(mesh: Mesh) -> Mesh:
    n_cells = mesh.n_cells
    n_pts = mesh.n_points
    conn = mesh.cell_conn.reshape(n_cells, 8)

    edge_pairs = np.sort(conn[:, _HEX_EDGES], axis=2).reshape(-1, 2)
    uniq_edges, edge_inv = np.unique(edge_pairs, axis=0, return_inverse=True)
    edge_ids = edge_inv.reshape(n_cells, len(_HEX_EDGES)) + n_pts

    quad_rows = np.sort(conn[:, _HEX_QUADS], axis=2).reshape(-1, 4)
    uniq_quads, quad_inv = np.unique(quad_rows, axis=0, return_inverse=True)
    quad_ids = quad_inv.reshape(n_cells, len(_HEX_QUADS)) + n_pts + uniq_edges.shape[0]

    center_ids = np.arange(n_cells, dtype=np.int64) + n_pts + uniq_edges.shape[0] + uniq_quads.shape[0]

    # midpoints computed once per unique entity => bitwise conformity
    edge_mid = mesh.points[uniq_edges].mean(axis=1)
    quad_mid = mesh.points[uniq_quads].mean(axis=1)
    cell_mid = mesh.points[conn].mean(axis=1)
    points = np.vstack([mesh.points, edge_mid, quad_mid, cell_mid])

    lat = np.empty((n_cells, 3, 3, 3), dtype=np.int64)
    for local, (i, j, k) in enumerate(_HEX_CORNER_IJK):
        lat[:, i, j, k] = conn[:, local]
    for e, (a, b) in enumerate(_HEX_EDGES):
        pa, pb = _HEX_CORNER_IJK[a], _HEX_CORNER_IJK[b]
        mid = ((pa[0] + pb[0]) // 2, (pa[1] + pb[1]) // 2, (pa[2] + pb[2]) // 2)
        lat[:, mid[0], mid[1], mid[2]] = edge_ids[:, e]
    for q, tmpl in enumerate(_HEX_QUADS):
        pts = [_HEX_CORNER_IJK[t] for t in tmpl]
        mid = tuple(sum(p[c] for p in pts) // 4 for c in range(3))
        lat[:, mid[0], mid[1], mid[2]] = quad_ids[:, q]
    lat[:, 1, 1, 1] = center_ids

    children = []
    for c in range(2):
        for b in range(2):
            for a in range(2):
                corners = [
                    lat[:, a + di, b + dj, c + dk]
                    for (di, dj, dk) in (
                        (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
                    )
                ]
                children.append(np.column_stack(corners))
    # interleave so the 8 children of cell c are consecutive
    new_conn = np.stack(children, axis=1).reshape(-1, 8)
    n_new = new_conn.shape[0]
    kinds = np.full(n_new, int(CellKind.HEXAHEDRON), dtype=np.uint8)
    offsets = np.arange(n_new + 1, dtype=np.int64) * 8

    refined = build_mesh_from_cells(points, kinds, offsets, new_conn.ravel())

    # inherit patches: every child boundary face contains exactly one
    # parent-face midpoint node, which identifies the parent face
    parent_patch_by_quad = np.full(uniq_quads.shape[0], -1, dtype=np.int64)
    names = list(mesh.patches.keys())
    quad_view = _void_view(uniq_quads)
    parent_loops = mesh.face_conn.reshape(-1, 4)  # all-hex mesh: quads only
    for pi, name in enumerate(names):
        idx = mesh.patches[name]
        rows = np.sort(parent_loops[idx], axis=1)
        pos = np.searchsorted(quad_view, _void_view(rows))
        parent_patch_by_quad[pos] = pi

    quad_lo = n_pts + uniq_edges.shape[0]
    quad_hi = quad_lo + uniq_quads.shape[0]
    child_bnd = refined.face_conn.reshape(-1, 4)[refined.n_internal:]
    mid_mask = (child_bnd >= quad_lo) & (child_bnd < quad_hi)
    mid_ids = child_bnd[np.arange(child_bnd.shape[0]), np.argmax(mid_mask, axis=1)]
    assigned = parent_patch_by_quad[mid_ids - quad_lo]
    patches = {
        name: (np.flatnonzero(assigned == pi) + refined.n_internal)
        for pi, name in enumerate(names)
        if np.any(assigned == pi)
    }
    return Mesh(
        points=refined.points,
        cell_kinds=refined.cell_kinds,
        cell_offsets=refined.cell_offsets,
        cell_conn=refined.cell_conn,
        face_offsets=refined.face_offsets,
        face_conn=refined.face_conn,
        owner=refined.owner,
        neighbor=refined.neighbor,
        n_internal=refined.n_internal,
        patches=patches,
        cell_centroids=refined.cell_centroids,
        cell_volumes=refined.cell_volumes,
        face_centroids=refined.face_centroids,
        face_area_vectors=refined.face_area_vectors,
    )


def mesh_summary(mesh: Mesh) -> str:
    lines = [
        f"{mesh.n_cells} cells, {mesh.n_points} points",
        f"{mesh.n_internal} interior faces, {mesh.n_boundary} boundary faces",
        f"total volume {mesh.cell_volumes.sum():.6g} m^3",
    ]
    for name, idx in mesh.patches.items():
        lines.append(f"patch {name}: {idx.size} faces")
    return "\n".join(lines)
