"""Case-level driver: build the mesh/problem from a config and march the
adaptive time loop.

Steps are truncated to land exactly on requested output times and on the
end time; truncation never feeds back into the controller state. If the
controller keeps shrinking an already-minimal step (Picard repeatedly
over budget at dt_min), the run aborts rather than crawling forever.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .case_io import CaseConfig, random_permeability, write_run_log, write_vtk_output
from .constitutive import permeability_from_conductivity
from .fields import CellField, Material
from .mesh import Mesh, build_box_mesh, refine_uniform, synth_terrain_mesh
from .richards import RichardsProblem
from .timectl import next_dt
from .vtk_legacy import load_patch_rules, read_vtk_legacy

__all__ = ["RunAborted", "RunResult", "build_mesh", "build_problem", "run_case"]

log = logging.getLogger(__name__)

# consecutive over-budget steps at dt_min before giving up
DT_MIN_ABORT_STREAK = 10


class RunAborted(RuntimeError):
    """Simulation stopped by the repeated-failure rule at dt_min."""


@dataclass
class RunResult:
    mesh: Mesh
    problem: RichardsProblem
    h: CellField
    time: float
    steps: int
    warned_steps: int
    log_rows: list
    outputs: list
    cumulative_mass_error: float
    storage_change: float
    cumulative_inflow: float


def build_mesh(spec, base_dir=".") -> Mesh:
    base = Path(base_dir)
    if spec.kind == "box":
        mesh = build_box_mesh(spec.nx, spec.ny, spec.nz, spec.bounds)
    elif spec.kind == "terrain":
        (x0, y0, _), (x1, y1, _) = spec.bounds
        mesh = synth_terrain_mesh(
            spec.nx, spec.ny, spec.nz, spec.surface, spec.depth,
            bounds_xy=((x0, y0), (x1, y1)),
        )
    elif spec.kind == "vtk":
        rules = load_patch_rules(base / spec.sidecar) if spec.sidecar else None
        mesh = read_vtk_legacy(base / spec.path, rules)
    else:
        raise ValueError(f"unknown mesh kind {spec.kind!r}")
    if spec.refine:
        mesh = refine_uniform(mesh, spec.refine)
    return mesh


def _load_column(path: Path, what: str, n_cells: int) -> np.ndarray:
    values = np.loadtxt(path, dtype=float, ndmin=1)
    if values.shape != (n_cells,):
        raise ValueError(
            f"{what} file {path} has {values.shape[0]} values for a "
            f"{n_cells}-cell mesh"
        )
    return values


def build_problem(cfg: CaseConfig, mesh: Mesh, base_dir=".") -> tuple[RichardsProblem, CellField]:
    base = Path(base_dir)
    perm = cfg.permeability
    if perm.kind == "uniform":
        value = perm.value
        if value is None:
            value = permeability_from_conductivity(perm.ks, cfg.fluid)
        K = np.full(mesh.n_cells, value)
    elif perm.kind == "random":
        K = random_permeability(mesh, perm.lo, perm.hi, perm.seed).values
    else:
        K = _load_column(base / perm.path, "permeability", mesh.n_cells)
    material = Material(cfg.vg, K, cfg.kr_exponent)
    problem = RichardsProblem(mesh, material, cfg.fluid, list(cfg.bcs), scheme=cfg.scheme)

    if cfg.initial.kind == "uniform":
        h0 = np.full(mesh.n_cells, cfg.initial.head)
    else:
        h0 = _load_column(base / cfg.initial.path, "initial head", mesh.n_cells)
    return problem, CellField("h", h0)


def run_case(
    cfg: CaseConfig,
    base_dir=".",
    output_dir=None,
    write_outputs: bool = True,
    max_steps: int | None = None,
) -> RunResult:
    """March the adaptive time loop to the configured end time."""
    mesh = build_mesh(cfg.mesh, base_dir)
    problem, h = build_problem(cfg, mesh, base_dir)
    return run_problem(
        problem, h, cfg,
        output_dir=output_dir if output_dir is not None else cfg.output_dir,
        write_outputs=write_outputs,
        max_steps=max_steps,
    )


def run_problem(
    problem: RichardsProblem,
    h: CellField,
    cfg: CaseConfig,
    output_dir=None,
    write_outputs: bool = True,
    max_steps: int | None = None,
) -> RunResult:
    mesh = problem.mesh
    state = cfg.time.initial_state()
    targets = sorted(set(cfg.output_times) | {cfg.end_time})
    t = 0.0
    steps = 0
    warned = 0
    min_fail_streak = 0
    log_rows = []
    outputs = []
    storage0 = float(mesh.cell_volumes @ problem.cell_closures(h.values)[0])
    cumulative_inflow = 0.0
    out_fields_K = problem.material.permeability

    while t < cfg.end_time - 1e-12 and (max_steps is None or steps < max_steps):
        next_target = next(x for x in targets if x > t + 1e-12)
        dt = min(state.dt, next_target - t)
        h, report = problem.picard_step(h, dt, cfg.picard)
        t = next_target if abs((t + dt) - next_target) <= 1e-9 * max(next_target, 1.0) else t + dt
        steps += 1
        warned += report.warned
        cumulative_inflow += dt * problem.boundary_inflow(h.values)
        log_rows.append((
            t, dt, report.n_iter,
            float(report.residual_history[-1]) if report.n_iter else 0.0,
            report.mass_balance_error,
        ))
        if write_outputs and any(abs(t - ot) <= 1e-9 * max(ot, 1.0) for ot in cfg.output_times):
            theta = problem.cell_closures(h.values)[0]
            outputs.append(write_vtk_output(
                mesh, {"h": h.values, "theta": theta, "K": out_fields_K},
                t, output_dir, cfg.name,
            ))

        # controller update from the untruncated step size
        was_over_budget = report.n_iter > cfg.time.n_max_iter
        at_floor = state.dt <= cfg.time.dt_min * (1 + 1e-12)
        state = next_dt(state, report.n_iter, cfg.time)
        if was_over_budget and at_floor:
            min_fail_streak += 1
            if min_fail_streak >= DT_MIN_ABORT_STREAK:
                raise RunAborted(
                    f"Picard exceeded its iteration budget {DT_MIN_ABORT_STREAK} "
                    f"consecutive times with dt already at dt_min={cfg.time.dt_min:g} s "
                    f"(t={t:g} s)"
                )
        else:
            min_fail_streak = 0

    storage1 = float(mesh.cell_volumes @ problem.cell_closures(h.values)[0])
    d_storage = storage1 - storage0
    scale = max(abs(d_storage), abs(cumulative_inflow), 1e-30)
    cume = abs(d_storage - cumulative_inflow) / scale

    if write_outputs:
        out_dir = Path(output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / f"{cfg.name}_log.csv"
        write_run_log(log_path, log_rows)
        outputs.append(log_path)

    return RunResult(
        mesh=mesh,
        problem=problem,
        h=h,
        time=t,
        steps=steps,
        warned_steps=warned,
        log_rows=log_rows,
        outputs=outputs,
        cumulative_mass_error=cume,
        storage_change=d_storage,
        cumulative_inflow=cumulative_inflow,
    )
