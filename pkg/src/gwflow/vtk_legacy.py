"""Legacy (ASCII) VTK unstructured-grid reader/writer and patch sidecars.

The reader accepts ``# vtk DataFile Version`` 3.0/4.x files containing
POINTS, CELLS, CELL_TYPES and optional CELL_DATA SCALARS sections, with
cell types restricted to tetrahedra (10), hexahedra (12) and wedges (13).
The writer emits doubles with 17 significant digits so that
read(write(mesh)) reproduces coordinates bit-exactly.

Legacy VTK carries no boundary-patch metadata; a sidecar file maps face
selectors to patch names, one rule per line::

    patchname plane axis={x|y|z} value=<float> tol=<float>
    patchname remaining

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .mesh import CellKind, Mesh, NODES_PER_KIND, PatchRule, build_mesh_from_cells

__all__ = [
    "VtkError",
    "VtkDataset",
    "read_vtk_dataset",
    "read_vtk_legacy",
    "write_vtk_legacy",
    "parse_patch_rules",
    "load_patch_rules",
]

_SUPPORTED_CODES = {int(k) for k in CellKind}


class VtkError(ValueError):
    """Malformed or unsupported legacy-VTK content; carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class VtkDataset:
    """Raw unstructured-grid content before face reconstruction."""

    points: np.ndarray
    kinds: np.ndarray
    offsets: np.ndarray
    conn: np.ndarray
    cell_data: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return self.kinds.shape[0]


class _Tokens:
    def __init__(self, lines: list[str], first_line: int):
        self.toks: list[str] = []
        self.lineno: list[int] = []
        for off, text in enumerate(lines):
            for tok in text.split():
                self.toks.append(tok)
                self.lineno.append(first_line + off)
        self.pos = 0
        self.last_line = first_line + len(lines)

    def exhausted(self) -> bool:
        return self.pos >= len(self.toks)

    def line(self) -> int:
        if self.pos < len(self.toks):
            return self.lineno[self.pos]
        return self.last_line

    def next(self, what: str) -> str:
        if self.exhausted():
            raise VtkError(f"unexpected end of file while reading {what}", self.last_line)
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise VtkError(f"expected integer for {what}, got {tok!r}", self.lineno[self.pos - 1])

    def next_floats(self, count: int, what: str) -> np.ndarray:
        if self.pos + count > len(self.toks):
            raise VtkError(
                f"{what}: expected {count} values, file ends after "
                f"{len(self.toks) - self.pos}", self.last_line,
            )
        chunk = self.toks[self.pos:self.pos + count]
        start_line = self.lineno[self.pos]
        self.pos += count
        try:
            return np.array(chunk, dtype=float)
        except ValueError:
            raise VtkError(f"{what}: non-numeric value encountered", start_line)

    def next_ints(self, count: int, what: str) -> np.ndarray:
        vals = self.next_floats(count, what)
        out = vals.astype(np.int64)
        if np.any(out != vals):
            raise VtkError(f"{what}: non-integer value encountered", self.last_line)
        return out


def _as_text(source) -> str:
    if isinstance(source, Path):
        return source.read_text()
    if isinstance(source, bytes):
        return source.decode("ascii")
    if isinstance(source, str):
        if source.lstrip().startswith("# vtk"):
            return source
        return Path(source).read_text()
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("ascii") if isinstance(data, bytes) else data
    raise TypeError(f"cannot read VTK from {type(source).__name__}")


def read_vtk_dataset(source) -> VtkDataset:
    """Parse an ASCII legacy-VTK unstructured grid into raw arrays."""
    text = _as_text(source)
    lines = text.splitlines()
    if len(lines) < 5:
        raise VtkError("file too short for a legacy VTK header", len(lines) or 1)
    if not lines[0].lstrip().startswith("# vtk DataFile Version"):
        raise VtkError("missing '# vtk DataFile Version' header", 1)
    fmt = lines[2].strip().upper()
    if fmt == "BINARY":
        raise VtkError("binary VTK is not supported, expected ASCII", 3)
    if fmt != "ASCII":
        raise VtkError(f"expected ASCII or BINARY, got {lines[2].strip()!r}", 3)

    toks = _Tokens(lines[3:], first_line=4)
    if toks.next("DATASET keyword").upper() != "DATASET":
        raise VtkError("expected DATASET section", toks.line())
    ds_type = toks.next("dataset type").upper()
    if ds_type != "UNSTRUCTURED_GRID":
        raise VtkError(f"unsupported dataset type {ds_type}", toks.line())

    points = None
    kinds = None
    offsets = None
    conn = None
    cell_data: dict[str, np.ndarray] = {}
    declared_cells = None

    while not toks.exhausted():
        here = toks.line()
        kw = toks.next("section keyword").upper()
        if kw == "POINTS":
            n = toks.next_int("POINTS count")
            dtype = toks.next("POINTS data type").lower()
            if dtype not in ("float", "double"):
                raise VtkError(f"POINTS type must be float or double, got {dtype!r}", here)
            points = toks.next_floats(3 * n, "POINTS coordinates").reshape(n, 3)
        elif kw == "CELLS":
            n = toks.next_int("CELLS count")
            size = toks.next_int("CELLS list size")
            flat = toks.next_ints(size, "CELLS connectivity")
            counts = np.empty(n, dtype=np.int64)
            conn_parts = []
            pos = 0
            for c in range(n):
                if pos >= size:
                    raise VtkError(
                        f"CELLS section declares {n} cells but data ends at cell {c}", here
                    )
                cnt = int(flat[pos])
                if pos + 1 + cnt > size:
                    raise VtkError(f"cell {c} node list overruns the CELLS section", here)
                counts[c] = cnt
                conn_parts.append(flat[pos + 1:pos + 1 + cnt])
                pos += 1 + cnt
            if pos != size:
                raise VtkError(
                    f"CELLS section size mismatch: declared {size}, consumed {pos}", here
                )
            offsets = np.zeros(n + 1, dtype=np.int64)
            offsets[1:] = np.cumsum(counts)
            conn = np.concatenate(conn_parts) if conn_parts else np.empty(0, np.int64)
            declared_cells = n
        elif kw == "CELL_TYPES":
            n = toks.next_int("CELL_TYPES count")
            if declared_cells is not None and n != declared_cells:
                raise VtkError(
                    f"CELL_TYPES count {n} does not match CELLS count {declared_cells}", here
                )
            kinds = toks.next_ints(n, "CELL_TYPES codes")
        elif kw == "CELL_DATA":
            n = toks.next_int("CELL_DATA count")
            if declared_cells is not None and n != declared_cells:
                raise VtkError(
                    f"CELL_DATA count {n} does not match CELLS count {declared_cells}", here
                )
            while not toks.exhausted():
                sub_line = toks.line()
                sub = toks.next("CELL_DATA attribute").upper()
                if sub != "SCALARS":
                    raise VtkError(
                        f"only SCALARS attributes are supported in CELL_DATA, got {sub}",
                        sub_line,
                    )
                name = toks.next("SCALARS name")
                toks.next("SCALARS data type")
                nxt = toks.next("LOOKUP_TABLE")
                if nxt.upper() != "LOOKUP_TABLE":
                    try:
                        ncomp = int(nxt)
                    except ValueError:
                        raise VtkError(
                            f"expected LOOKUP_TABLE or component count, got {nxt!r}", sub_line
                        )
                    if ncomp != 1:
                        raise VtkError(
                            f"only 1-component scalars supported, got {ncomp}", sub_line
                        )
                    nxt = toks.next("LOOKUP_TABLE")
                    if nxt.upper() != "LOOKUP_TABLE":
                        raise VtkError(f"expected LOOKUP_TABLE, got {nxt!r}", sub_line)
                toks.next("lookup table name")
                cell_data[name] = toks.next_floats(n, f"SCALARS {name} values")
        else:
            raise VtkError(f"unsupported VTK section {kw!r}", here)

    if points is None:
        raise VtkError("missing POINTS section", toks.last_line)
    if offsets is None or conn is None:
        raise VtkError("missing CELLS section", toks.last_line)
    if kinds is None:
        raise VtkError("missing CELL_TYPES section", toks.last_line)

    for c, code in enumerate(kinds):
        if int(code) not in _SUPPORTED_CODES:
            raise VtkError(
                f"unsupported cell type {int(code)} (cell {c}); supported VTK codes: "
                f"{sorted(_SUPPORTED_CODES)}"
            )
        expected = NODES_PER_KIND[CellKind(int(code))]
        got = int(offsets[c + 1] - offsets[c])
        if got != expected:
            raise VtkError(
                f"cell {c} of VTK type {int(code)} has {got} nodes, expected {expected}"
            )
    if conn.size and (conn.min() < 0 or conn.max() >= points.shape[0]):
        raise VtkError("cell connectivity references points out of range")

    return VtkDataset(points, kinds.astype(np.uint8), offsets, conn, cell_data)


def read_vtk_legacy(source, patch_rules: Sequence[PatchRule] | None = None) -> Mesh:
    """Read a legacy-VTK unstructured grid and reconstruct the face mesh.

    Boundary faces go to a single ``boundary`` patch unless ``patch_rules``
    (typically from a sidecar file) says otherwise.
    """
    ds = read_vtk_dataset(source)
    return build_mesh_from_cells(ds.points, ds.kinds, ds.offsets, ds.conn, patch_rules)


def write_vtk_legacy(
    mesh: Mesh,
    target,
    cell_data: dict[str, np.ndarray] | None = None,
    title: str = "gwflow unstructured grid",
) -> None:
    """Write mesh (and optional per-cell scalar fields) as ASCII legacy VTK."""
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title.replace("\n", " ")[:255] + "\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {mesh.n_points} double\n")
    for x, y, z in mesh.points:
        buf.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
    counts = np.diff(mesh.cell_offsets)
    buf.write(f"CELLS {mesh.n_cells} {int(counts.sum()) + mesh.n_cells}\n")
    for c in range(mesh.n_cells):
        nodes = mesh.cell_conn[mesh.cell_offsets[c]:mesh.cell_offsets[c + 1]]
        buf.write(str(len(nodes)) + " " + " ".join(str(i) for i in nodes) + "\n")
    buf.write(f"CELL_TYPES {mesh.n_cells}\n")
    for k in mesh.cell_kinds:
        buf.write(f"{int(k)}\n")
    if cell_data:
        buf.write(f"CELL_DATA {mesh.n_cells}\n")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_cells,):
                raise ValueError(
                    f"cell data {name!r} has shape {values.shape}, expected ({mesh.n_cells},)"
                )
            buf.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in values:
                buf.write(f"{v:.17g}\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)


def parse_patch_rules(text: str) -> list[PatchRule]:
    """Parse sidecar patch rules (see module docstring for the grammar)."""
    rules: list[PatchRule] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 2 and parts[1] == "remaining":
            rules.append(PatchRule(parts[0], "remaining"))
            continue
        if len(parts) == 5 and parts[1] == "plane":
            kv = {}
            for item in parts[2:]:
                if "=" not in item:
                    raise ValueError(
                        f"sidecar line {lineno}: expected key=value, got {item!r}"
                    )
                k, v = item.split("=", 1)
                kv[k] = v
            missing = {"axis", "value", "tol"} - kv.keys()
            if missing:
                raise ValueError(
                    f"sidecar line {lineno}: missing {sorted(missing)} in plane rule"
                )
            try:
                rules.append(
                    PatchRule(parts[0], "plane", kv["axis"], float(kv["value"]), float(kv["tol"]))
                )
            except ValueError as exc:
                raise ValueError(f"sidecar line {lineno}: {exc}") from None
            continue
        raise ValueError(
            f"sidecar line {lineno}: expected '<name> plane axis=.. value=.. tol=..' "
            f"or '<name> remaining', got {raw!r}"
        )
    return rules


def load_patch_rules(path) -> list[PatchRule]:
    return parse_patch_rules(Path(path).read_text())
