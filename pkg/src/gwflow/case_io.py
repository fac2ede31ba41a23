"""Case-file parsing, result serialization and profile extraction.

Case files are line-oriented ``key = value [unit]`` entries under
bracketed section headers; ``#`` starts a comment and keys are
case-sensitive::

    [mesh]
    type = box
    nx = 1
    ...
    [bc.z+]
    type = fixed_head
    value = -75 cm

Everything is converted to SI at parse time; the rest of the package
never sees units. ``format_case`` re-emits a config in canonical SI form
such that parse(format(config)) == config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .constitutive import FluidProps, VanGenuchtenParams
from .fields import BoundarySpec, CellField
from .mesh import Mesh, TerrainSurface
from .richards import PicardConfig
from .timectl import TimeControlConfig

__all__ = [
    "CaseError",
    "MeshSpec",
    "PermeabilitySpec",
    "InitialSpec",
    "CaseConfig",
    "parse_case",
    "parse_case_file",
    "format_case",
    "random_permeability",
    "write_vtk_output",
    "extract_profile",
    "write_profile_csv",
    "write_run_log",
    "RUN_LOG_HEADER",
]

RUN_LOG_HEADER = "time_s,dt_s,n_picard,residual_m,mass_balance_err"

# unit suffix -> (dimension, factor to SI)
_UNITS = {
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "s": ("time", 1.0),
    "min": ("time", 60.0),
    "h": ("time", 3600.0),
    "day": ("time", 86400.0),
    "1/m": ("inv_length", 1.0),
    "1/cm": ("inv_length", 100.0),
    "m/s": ("velocity", 1.0),
    "cm/s": ("velocity", 1e-2),
    "m2": ("area", 1.0),
    "Pa.s": ("viscosity", 1.0),
    "kg/m3": ("density", 1.0),
}


class CaseError(ValueError):
    """Invalid case file; message carries key names and line numbers."""


@dataclass(frozen=True)
class MeshSpec:
    kind: str  # box | terrain | vtk
    nx: int = 1
    ny: int = 1
    nz: int = 1
    bounds: tuple = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    depth: float = 0.0
    surface: TerrainSurface | None = None
    path: str = ""
    sidecar: str = ""
    refine: int = 0


@dataclass(frozen=True)
class PermeabilitySpec:
    kind: str  # uniform | random | file
    value: float | None = None  # m^2 (uniform, from `value` or derived from `ks`)
    ks: float | None = None  # m/s, converted to m^2 at problem build
    lo: float = 0.0
    hi: float = 0.0
    seed: int | None = None
    path: str = ""


@dataclass(frozen=True)
class InitialSpec:
    kind: str  # uniform | file
    head: float = 0.0
    path: str = ""


@dataclass(frozen=True)
class CaseConfig:
    name: str
    mesh: MeshSpec
    fluid: FluidProps
    vg: VanGenuchtenParams
    kr_exponent: float
    permeability: PermeabilitySpec
    bcs: tuple  # tuple of BoundarySpec, file order
    initial: InitialSpec
    time: TimeControlConfig
    end_time: float
    picard: PicardConfig
    scheme: str
    output_times: tuple
    output_dir: str


# ---------------------------------------------------------------------------
# low-level parsing
# ---------------------------------------------------------------------------

@dataclass
class _Entry:
    value: str
    line: int
    used: bool = False


def _split_sections(text: str) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current: dict[str, _Entry] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current_name = line[1:-1].strip()
            if not current_name:
                raise CaseError(f"line {lineno}: empty section header")
            if current_name in sections:
                raise CaseError(f"line {lineno}: duplicate section [{current_name}]")
            current = {}
            sections[current_name] = current
            continue
        if current is None:
            raise CaseError(f"line {lineno}: entry before any [section] header")
        if "=" not in line:
            raise CaseError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise CaseError(f"line {lineno}: empty key in [{current_name}]")
        if key in current:
            raise CaseError(f"line {lineno}: duplicate key {key!r} in [{current_name}]")
        current[key] = _Entry(value, lineno)
    return sections


class _Section:
    def __init__(self, name: str, entries: dict[str, _Entry]):
        self.name = name
        self.entries = entries

    def _fetch(self, key: str, required: bool) -> _Entry | None:
        entry = self.entries.get(key)
        if entry is None:
            if required:
                raise CaseError(f"[{self.name}]: missing mandatory key {key!r}")
            return None
        entry.used = True
        return entry

    def string(self, key: str, default: str | None = None) -> str:
        entry = self._fetch(key, default is None)
        return entry.value if entry is not None else default  # type: ignore[return-value]

    def choice(self, key: str, options: tuple[str, ...], default: str | None = None) -> str:
        value = self.string(key, default)
        if value not in options:
            entry = self.entries.get(key)
            where = f"line {entry.line}: " if entry else ""
            raise CaseError(
                f"{where}[{self.name}] {key} must be one of {list(options)}, got {value!r}"
            )
        return value

    def number(self, key: str, dimension: str | None, default: float | None = None) -> float:
        entry = self._fetch(key, default is None)
        if entry is None:
            return float(default)  # type: ignore[arg-type]
        parts = entry.value.split()
        if not parts:
            raise CaseError(f"line {entry.line}: [{self.name}] {key} has no value")
        try:
            magnitude = float(parts[0])
        except ValueError:
            raise CaseError(
                f"line {entry.line}: [{self.name}] {key}: {parts[0]!r} is not a number"
            )
        return self._convert(key, entry, magnitude, parts[1:], dimension)

    def _convert(self, key, entry, magnitude, unit_parts, dimension) -> float:
        if not unit_parts:
            return magnitude  # bare numbers are SI
        if len(unit_parts) > 1:
            raise CaseError(
                f"line {entry.line}: [{self.name}] {key}: unexpected trailing "
                f"tokens {' '.join(unit_parts[1:])!r}"
            )
        unit = unit_parts[0]
        if unit not in _UNITS:
            raise CaseError(
                f"line {entry.line}: [{self.name}] {key}: unknown unit {unit!r} "
                f"(supported: {', '.join(sorted(_UNITS))})"
            )
        unit_dim, factor = _UNITS[unit]
        if dimension is None:
            raise CaseError(
                f"line {entry.line}: [{self.name}] {key} is dimensionless but "
                f"carries unit {unit!r}"
            )
        if unit_dim != dimension:
            raise CaseError(
                f"line {entry.line}: [{self.name}] {key} expects a {dimension} "
                f"unit, got {unit!r} ({unit_dim})"
            )
        return magnitude * factor

    def integer(self, key: str, default: int | None = None) -> int:
        value = self.number(key, None, default)
        if value != int(value):
            entry = self.entries.get(key)
            where = f"line {entry.line}: " if entry else ""
            raise CaseError(f"{where}[{self.name}] {key} must be an integer, got {value}")
        return int(value)

    def number_list(self, key: str, dimension: str) -> tuple[float, ...]:
        entry = self._fetch(key, True)
        parts = entry.value.split()
        if not parts:
            raise CaseError(f"line {entry.line}: [{self.name}] {key} has no values")
        unit_factor = 1.0
        if parts[-1] in _UNITS:
            unit_dim, unit_factor = _UNITS[parts[-1]]
            if unit_dim != dimension:
                raise CaseError(
                    f"line {entry.line}: [{self.name}] {key} expects {dimension} "
                    f"values, got unit {parts[-1]!r}"
                )
            parts = parts[:-1]
        try:
            return tuple(float(p) * unit_factor for p in parts)
        except ValueError:
            raise CaseError(f"line {entry.line}: [{self.name}] {key}: non-numeric value")

    def reject_unused(self):
        for key, entry in self.entries.items():
            if not entry.used:
                raise CaseError(
                    f"line {entry.line}: unknown key {key!r} in section [{self.name}]"
                )


# ---------------------------------------------------------------------------
# case assembly
# ---------------------------------------------------------------------------

_BOX_PATCHES = ("x-", "x+", "y-", "y+", "z-", "z+")
_TERRAIN_PATCHES = ("x-", "x+", "y-", "y+", "bottom", "top")
_MANDATORY_SECTIONS = (
    "mesh", "fluid", "vangenuchten", "permeability", "initial", "time", "picard", "output",
)


def _apply_overrides(sections, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise CaseError(f"override {item!r}: expected section.key=value")
        path, value = item.split("=", 1)
        if "." not in path:
            raise CaseError(f"override {item!r}: expected section.key=value")
        section, key = path.strip().rsplit(".", 1)
        sections.setdefault(section, {})[key.strip()] = _Entry(value.strip(), 0)


def parse_case(text: str, overrides=None, name: str = "case") -> CaseConfig:
    """Parse and validate a case file; all values come out in SI."""
    sections = _split_sections(text)
    _apply_overrides(sections, overrides)
    missing = [s for s in _MANDATORY_SECTIONS if s not in sections]
    if missing:
        raise CaseError(f"missing mandatory sections: {', '.join('[' + s + ']' for s in missing)}")

    wrapped = {nm: _Section(nm, entries) for nm, entries in sections.items()}

    mesh_sec = wrapped["mesh"]
    kind = mesh_sec.choice("type", ("box", "terrain", "vtk"))
    refine = mesh_sec.integer("refine", 0)
    if refine < 0:
        raise CaseError("[mesh] refine must be >= 0")
    if kind == "box":
        mesh = MeshSpec(
            kind="box",
            nx=mesh_sec.integer("nx"), ny=mesh_sec.integer("ny"), nz=mesh_sec.integer("nz"),
            bounds=(
                (mesh_sec.number("xmin", "length"), mesh_sec.number("ymin", "length"),
                 mesh_sec.number("zmin", "length")),
                (mesh_sec.number("xmax", "length"), mesh_sec.number("ymax", "length"),
                 mesh_sec.number("zmax", "length")),
            ),
            refine=refine,
        )
        static_patches = _BOX_PATCHES
    elif kind == "terrain":
        surface_kind = mesh_sec.choice("surface", ("flat", "sine"))
        surface = TerrainSurface(
            kind=surface_kind,
            base=mesh_sec.number("surface_base", "length"),
            amplitude=mesh_sec.number("surface_amplitude", "length", 0.0),
            waves_x=mesh_sec.number("surface_waves_x", None, 1.0),
            waves_y=mesh_sec.number("surface_waves_y", None, 1.0),
        )
        mesh = MeshSpec(
            kind="terrain",
            nx=mesh_sec.integer("nx"), ny=mesh_sec.integer("ny"), nz=mesh_sec.integer("nz"),
            bounds=(
                (mesh_sec.number("xmin", "length"), mesh_sec.number("ymin", "length"), 0.0),
                (mesh_sec.number("xmax", "length"), mesh_sec.number("ymax", "length"), 0.0),
            ),
            depth=mesh_sec.number("depth", "length"),
            surface=surface,
            refine=refine,
        )
        static_patches = _TERRAIN_PATCHES
    else:
        mesh = MeshSpec(
            kind="vtk",
            path=mesh_sec.string("path"),
            sidecar=mesh_sec.string("sidecar", ""),
            refine=refine,
        )
        static_patches = None
    mesh_sec.reject_unused()

    fluid_sec = wrapped["fluid"]
    g_mag = fluid_sec.number("g", None, 9.81)
    fluid = FluidProps(
        rho=fluid_sec.number("rho", "density", 1000.0),
        mu=fluid_sec.number("mu", "viscosity", 1e-3),
        g=(0.0, 0.0, -abs(g_mag)),
    )
    fluid_sec.reject_unused()

    vg_sec = wrapped["vangenuchten"]
    vg = VanGenuchtenParams(
        alpha=vg_sec.number("alpha", "inv_length"),
        n=vg_sec.number("n", None),
        theta_r=vg_sec.number("theta_r", None),
        theta_s=vg_sec.number("theta_s", None),
    )
    kr_exponent = vg_sec.number("kr_exponent", None, 0.5)
    vg_sec.reject_unused()

    perm_sec = wrapped["permeability"]
    perm_kind = perm_sec.choice("type", ("uniform", "random", "file"))
    if perm_kind == "uniform":
        value = perm_sec.number("value", "area", math.nan)
        ks = perm_sec.number("ks", "velocity", math.nan)
        if math.isnan(value) == math.isnan(ks):
            raise CaseError(
                "[permeability] uniform needs exactly one of 'value' (m2) or 'ks' (m/s)"
            )
        perm = PermeabilitySpec(
            "uniform",
            value=None if math.isnan(value) else value,
            ks=None if math.isnan(ks) else ks,
        )
    elif perm_kind == "random":
        if "seed" not in perm_sec.entries:
            raise CaseError("[permeability] random distribution requires an explicit seed")
        perm = PermeabilitySpec(
            "random",
            lo=perm_sec.number("lo", "area"),
            hi=perm_sec.number("hi", "area"),
            seed=perm_sec.integer("seed"),
        )
        if not (0 < perm.lo <= perm.hi):
            raise CaseError("[permeability] need 0 < lo <= hi")
    else:
        perm = PermeabilitySpec("file", path=perm_sec.string("path"))
    perm_sec.reject_unused()

    init_sec = wrapped["initial"]
    init_kind = init_sec.choice("type", ("uniform", "file"))
    if init_kind == "uniform":
        initial = InitialSpec("uniform", head=init_sec.number("head", "length"))
    else:
        initial = InitialSpec("file", path=init_sec.string("path"))
    init_sec.reject_unused()

    bcs = []
    for sec_name in sections:
        if not sec_name.startswith("bc."):
            continue
        patch = sec_name[3:]
        bc_sec = wrapped[sec_name]
        bc_kind = bc_sec.choice("type", ("fixed_head", "fixed_velocity", "zero_flux"))
        if bc_kind == "fixed_head":
            bcs.append(BoundarySpec.fixed_head(patch, bc_sec.number("value", "length")))
        elif bc_kind == "fixed_velocity":
            bcs.append(BoundarySpec.fixed_velocity(patch, (
                bc_sec.number("ux", "velocity", 0.0),
                bc_sec.number("uy", "velocity", 0.0),
                bc_sec.number("uz", "velocity", 0.0),
            )))
        else:
            bcs.append(BoundarySpec.zero_flux(patch))
        bc_sec.reject_unused()
    seen = [bc.patch for bc in bcs]
    if len(set(seen)) != len(seen):
        dupes = sorted({p for p in seen if seen.count(p) > 1})
        raise CaseError(f"duplicate [bc.*] sections for patches: {dupes}")
    if static_patches is not None:
        missing_bc = [p for p in static_patches if p not in seen]
        if missing_bc:
            raise CaseError(f"patches without a [bc.*] section: {missing_bc}")
        unknown_bc = [p for p in seen if p not in static_patches]
        if unknown_bc:
            raise CaseError(f"[bc.*] sections for unknown patches: {unknown_bc}")

    time_sec = wrapped["time"]
    end_time = time_sec.number("end", "time")
    time_cfg = TimeControlConfig(
        n_min_iter=time_sec.integer("n_min_iter", 3),
        n_max_iter=time_sec.integer("n_max_iter", 8),
        n_stab=time_sec.integer("n_stab", 5),
        f_increase=time_sec.number("f_increase", None, 1.3),
        f_decrease=time_sec.number("f_decrease", None, 0.7),
        dt_init=time_sec.number("dt_init", "time", 1.0),
        dt_min=time_sec.number("dt_min", "time", 1e-4),
        dt_max=time_sec.number("dt_max", "time", 86400.0),
    )
    time_sec.reject_unused()
    if end_time <= 0:
        raise CaseError("[time] end must be > 0")

    picard_sec = wrapped["picard"]
    picard = PicardConfig(
        epsilon=picard_sec.number("epsilon", "length"),
        n_max_iter=picard_sec.integer("n_max_iter", time_cfg.n_max_iter),
        hard_cap_factor=picard_sec.integer("hard_cap_factor", 2),
        relaxation=picard_sec.number("relaxation", None, 1.0),
    )
    scheme = picard_sec.choice("scheme", ("arithmetic", "upwind"), "arithmetic")
    picard_sec.reject_unused()

    out_sec = wrapped["output"]
    output_times = out_sec.number_list("times", "time")
    if any(b <= a for a, b in zip(output_times, output_times[1:])):
        raise CaseError("[output] times must be strictly increasing")
    if output_times and output_times[0] <= 0:
        raise CaseError("[output] times must be positive")
    if output_times and output_times[-1] > end_time + 1e-9:
        raise CaseError(
            f"[output] time {output_times[-1]} lies beyond [time] end = {end_time}"
        )
    case_name = out_sec.string("name", name)
    output_dir = out_sec.string("dir", f"{case_name}_out")
    out_sec.reject_unused()

    for sec_name in sections:
        if sec_name not in _MANDATORY_SECTIONS and not sec_name.startswith("bc."):
            raise CaseError(f"unknown section [{sec_name}]")

    return CaseConfig(
        name=case_name,
        mesh=mesh,
        fluid=fluid,
        vg=vg,
        kr_exponent=kr_exponent,
        permeability=perm,
        bcs=tuple(bcs),
        initial=initial,
        time=time_cfg,
        end_time=end_time,
        picard=picard,
        scheme=scheme,
        output_times=tuple(output_times),
        output_dir=output_dir,
    )


def parse_case_file(path, overrides=None) -> CaseConfig:
    path = Path(path)
    return parse_case(path.read_text(), overrides=overrides, name=path.stem)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def format_case(cfg: CaseConfig) -> str:
    """Emit a config as canonical SI case text; parse(format(cfg)) == cfg."""
    out = [f"# case {cfg.name} (canonical SI form)", "[mesh]", f"type = {cfg.mesh.kind}"]
    m = cfg.mesh
    if m.kind in ("box", "terrain"):
        out += [f"nx = {m.nx}", f"ny = {m.ny}", f"nz = {m.nz}"]
        (x0, y0, z0), (x1, y1, z1) = m.bounds
        out += [f"xmin = {_fmt(x0)}", f"xmax = {_fmt(x1)}",
                f"ymin = {_fmt(y0)}", f"ymax = {_fmt(y1)}"]
        if m.kind == "box":
            out += [f"zmin = {_fmt(z0)}", f"zmax = {_fmt(z1)}"]
        else:
            s = m.surface
            out += [f"depth = {_fmt(m.depth)}", f"surface = {s.kind}",
                    f"surface_base = {_fmt(s.base)}"]
            if s.kind == "sine":
                out += [f"surface_amplitude = {_fmt(s.amplitude)}",
                        f"surface_waves_x = {_fmt(s.waves_x)}",
                        f"surface_waves_y = {_fmt(s.waves_y)}"]
    else:
        out.append(f"path = {m.path}")
        if m.sidecar:
            out.append(f"sidecar = {m.sidecar}")
    if m.refine:
        out.append(f"refine = {m.refine}")

    out += ["", "[fluid]", f"rho = {_fmt(cfg.fluid.rho)}", f"mu = {_fmt(cfg.fluid.mu)}",
            f"g = {_fmt(cfg.fluid.g_mag)}"]
    out += ["", "[vangenuchten]", f"alpha = {_fmt(cfg.vg.alpha)}", f"n = {_fmt(cfg.vg.n)}",
            f"theta_r = {_fmt(cfg.vg.theta_r)}", f"theta_s = {_fmt(cfg.vg.theta_s)}",
            f"kr_exponent = {_fmt(cfg.kr_exponent)}"]

    p = cfg.permeability
    out += ["", "[permeability]", f"type = {p.kind}"]
    if p.kind == "uniform":
        if p.value is not None:
            out.append(f"value = {_fmt(p.value)}")
        else:
            out.append(f"ks = {_fmt(p.ks)}")
    elif p.kind == "random":
        out += [f"lo = {_fmt(p.lo)}", f"hi = {_fmt(p.hi)}", f"seed = {p.seed}"]
    else:
        out.append(f"path = {p.path}")

    for bc in cfg.bcs:
        out += ["", f"[bc.{bc.patch}]", f"type = {bc.kind}"]
        if bc.kind == "fixed_head":
            out.append(f"value = {_fmt(bc.head)}")
        elif bc.kind == "fixed_velocity":
            ux, uy, uz = bc.velocity
            out += [f"ux = {_fmt(ux)}", f"uy = {_fmt(uy)}", f"uz = {_fmt(uz)}"]

    init = cfg.initial
    out += ["", "[initial]", f"type = {init.kind}"]
    if init.kind == "uniform":
        out.append(f"head = {_fmt(init.head)}")
    else:
        out.append(f"path = {init.path}")

    t = cfg.time
    out += ["", "[time]", f"end = {_fmt(cfg.end_time)}", f"dt_init = {_fmt(t.dt_init)}",
            f"dt_min = {_fmt(t.dt_min)}", f"dt_max = {_fmt(t.dt_max)}",
            f"n_min_iter = {t.n_min_iter}", f"n_max_iter = {t.n_max_iter}",
            f"n_stab = {t.n_stab}", f"f_increase = {_fmt(t.f_increase)}",
            f"f_decrease = {_fmt(t.f_decrease)}"]

    pc = cfg.picard
    out += ["", "[picard]", f"epsilon = {_fmt(pc.epsilon)}",
            f"n_max_iter = {pc.n_max_iter}", f"hard_cap_factor = {pc.hard_cap_factor}",
            f"relaxation = {_fmt(pc.relaxation)}", f"scheme = {cfg.scheme}"]

    out += ["", "[output]",
            "times = " + " ".join(_fmt(x) for x in cfg.output_times),
            f"dir = {cfg.output_dir}", f"name = {cfg.name}"]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# random permeability
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _xorshift_uniform(n, seed):
    """splitmix64-seeded xorshift64* stream mapped to [0, 1).

    Pure 64-bit integer arithmetic with the published constants, so the
    sequence is identical on every platform.
    """
    out = np.empty(n)
    # splitmix64 of the seed initializes the xorshift64* state
    z = (np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    state = z ^ (z >> np.uint64(31))
    if state == np.uint64(0):
        state = np.uint64(0x9E3779B97F4A7C15)
    for i in range(n):
        state ^= state >> np.uint64(12)
        state ^= state << np.uint64(25)
        state ^= state >> np.uint64(27)
        value = state * np.uint64(2685821657736338717)
        out[i] = (value >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out


def random_permeability(mesh: Mesh, lo: float, hi: float, seed: int) -> CellField:
    """Per-cell uniform permeability samples in [lo, hi] from the named
    deterministic generator; identical seed gives identical fields."""
    if not (0 < lo <= hi):
        raise ValueError(f"invalid permeability range [{lo}, {hi}]")
    u = _xorshift_uniform(mesh.n_cells, seed)
    return CellField("K", lo + u * (hi - lo))


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _format_time_token(t: float) -> str:
    if t == int(t):
        return str(int(t))
    return f"{t:.10g}"


def write_vtk_output(mesh: Mesh, fields: dict, time: float, out_dir, case_name: str) -> Path:
    """One legacy-VTK file with CELL_DATA scalars per output time."""
    from .vtk_legacy import write_vtk_legacy

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not out_dir.is_dir():
        raise ValueError(f"output path {out_dir} is not a directory")
    data = {}
    for name, values in fields.items():
        arr = values.values if isinstance(values, CellField) else np.asarray(values, float)
        data[name] = arr
    path = out_dir / f"{case_name}_t{_format_time_token(time)}.vtk"
    write_vtk_legacy(mesh, path, cell_data=data, title=f"{case_name} t={time:g} s")
    return path


def extract_profile(mesh: Mesh, field, axis: str = "z"):
    """Cell values sorted by centroid coordinate along an axis; cells at
    the same coordinate (to 1e-9 of the coordinate span, i.e. roundoff
    ties) are averaged. Returns (coords, values)."""
    values = field.values if isinstance(field, CellField) else np.asarray(field, float)
    if values.shape[0] != mesh.n_cells:
        raise ValueError("field not sized to mesh")
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    coords = mesh.cell_centroids[:, "xyz".index(axis)]
    order = np.argsort(coords, kind="stable")
    sorted_coords = coords[order]
    span = float(sorted_coords[-1] - sorted_coords[0])
    tol = 1e-9 * max(span, abs(sorted_coords[0]), 1e-300)
    breaks = np.empty(coords.shape[0], dtype=bool)
    breaks[0] = True
    breaks[1:] = np.diff(sorted_coords) > tol
    group = np.cumsum(breaks) - 1
    n_groups = int(group[-1]) + 1
    counts = np.bincount(group, minlength=n_groups)
    mean_coord = np.bincount(group, weights=sorted_coords, minlength=n_groups) / counts
    mean_value = np.bincount(group, weights=values[order], minlength=n_groups) / counts
    return mean_coord, mean_value


def write_profile_csv(path, coords, values) -> None:
    lines = ["coord_m,value"]
    lines += [f"{c:.17g},{v:.17g}" for c, v in zip(coords, values)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_run_log(path, rows) -> None:
    """Run log table: one row per time step."""
    lines = [RUN_LOG_HEADER]
    for time, dt, n_picard, residual, mbe in rows:
        lines.append(f"{time:.10g},{dt:.10g},{n_picard},{residual:.6e},{mbe:.6e}")
    Path(path).write_text("\n".join(lines) + "\n")
