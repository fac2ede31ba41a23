from pathlib import Path

import numpy as np
import pytest

from gwflow.case_io import parse_case, parse_case_file
from gwflow.simulation import RunAborted, build_mesh, run_case

CASES_DIR = Path(__file__).resolve().parents[1] / "src" / "gwflow" / "cases"

SHORT_COLUMN = """
[mesh]
type = box
nx = 1
ny = 1
nz = 40
xmin = 0 m
xmax = 0.01 m
ymin = 0 m
ymax = 0.01 m
zmin = -1 m
zmax = 0 m

[fluid]
rho = 1000 kg/m3
mu = 1e-3 Pa.s

[vangenuchten]
alpha = 0.0335 1/cm
n = 2.0
theta_r = 0.102
theta_s = 0.368

[permeability]
type = uniform
ks = 0.00922 cm/s

[bc.z+]
type = fixed_head
value = -0.75 m
[bc.z-]
type = fixed_head
value = -10 m
[bc.x-]
type = zero_flux
[bc.x+]
type = zero_flux
[bc.y-]
type = zero_flux
[bc.y+]
type = zero_flux

[initial]
type = uniform
head = -10 m

[time]
end = 10 s
dt_init = 0.05 s
dt_min = 1e-5 s
dt_max = 2 s

[picard]
epsilon = 1e-5 m

[output]
times = 4 10 s
"""


class TestRunCase:
    def test_short_column_run(self, tmp_path):
        cfg = parse_case(SHORT_COLUMN, name="short")
        result = run_case(cfg, output_dir=tmp_path / "out")
        assert result.time == pytest.approx(10.0)
        assert result.warned_steps == 0
        vtks = sorted((tmp_path / "out").glob("short_t*.vtk"))
        assert [p.name for p in vtks] == ["short_t10.vtk", "short_t4.vtk"]
        log = (tmp_path / "out" / "short_log.csv").read_text().splitlines()
        assert log[0] == "time_s,dt_s,n_picard,residual_m,mass_balance_err"
        assert len(log) == result.steps + 1

    def test_output_times_hit_exactly(self, tmp_path):
        cfg = parse_case(SHORT_COLUMN, name="short")
        result = run_case(cfg, output_dir=tmp_path, write_outputs=False)
        times = [row[0] for row in result.log_rows]
        for target in (4.0, 10.0):
            assert any(abs(t - target) < 1e-12 for t in times)

    def test_infiltration_profile_monotone(self, tmp_path):
        # physical sanity: the front is monotone in z between the
        # boundary and initial heads
        cfg = parse_case(SHORT_COLUMN, name="short")
        result = run_case(cfg, output_dir=tmp_path, write_outputs=False)
        h = result.h.values
        assert np.all(np.diff(h) >= -1e-9)  # increasing toward the wet top
        assert h.min() >= -10.0 - 1e-9
        assert h.max() <= -0.75 + 1e-9

    def test_max_steps_cuts_run_short(self, tmp_path):
        cfg = parse_case(SHORT_COLUMN, name="short")
        result = run_case(cfg, output_dir=tmp_path, write_outputs=False, max_steps=5)
        assert result.steps == 5
        assert result.time < 10.0

    def test_epsilon_override_tightens_residuals(self, tmp_path):
        loose = run_case(
            parse_case(SHORT_COLUMN, name="short", overrides=["picard.epsilon=1e-3"]),
            output_dir=tmp_path, write_outputs=False,
        )
        tight = run_case(
            parse_case(SHORT_COLUMN, name="short", overrides=["picard.epsilon=1e-7"]),
            output_dir=tmp_path, write_outputs=False,
        )
        assert max(r[3] for r in tight.log_rows) <= 1e-7
        assert max(r[3] for r in loose.log_rows) > 1e-7

    def test_dt_min_abort(self, tmp_path):
        # an impossible tolerance with dt pinned at dt_min trips the
        # repeated-failure rule instead of crawling forever
        overrides = [
            "picard.epsilon=1e-15",
            "time.dt_init=1e-5",
            "time.dt_max=1e-5",
            "time.dt_min=1e-5",
        ]
        cfg = parse_case(SHORT_COLUMN, name="short", overrides=overrides)
        with pytest.raises(RunAborted, match="dt_min"):
            run_case(cfg, output_dir=tmp_path, write_outputs=False)

    def test_cumulative_mass_error_small_for_short_run(self, tmp_path):
        cfg = parse_case(SHORT_COLUMN, name="short")
        result = run_case(cfg, output_dir=tmp_path, write_outputs=False)
        assert result.cumulative_mass_error < 0.05

    def test_run_bit_identical_across_thread_counts(self):
        from gwflow.parallel import max_threads, set_thread_count

        cfg = parse_case(SHORT_COLUMN, name="short")
        heads = []
        for threads in (1, min(2, max_threads())):
            set_thread_count(threads)
            result = run_case(cfg, write_outputs=False, max_steps=25)
            heads.append(result.h.values.tobytes())
        set_thread_count(max_threads())
        assert heads[0] == heads[1]


class TestFixedVelocityTutorial:
    def test_imposed_flux_delivered(self, tmp_path):
        # shortened run of the velocity-driven tutorial: the top patch
        # must deliver exactly U.S per unit time (the tiny remainder is
        # the bottom fixed-head exchange)
        cfg = parse_case_file(
            CASES_DIR / "1Dinfiltration_Ufixed.case",
            overrides=["time.end=30", "output.times=30"],
        )
        result = run_case(cfg, base_dir=CASES_DIR, output_dir=tmp_path, write_outputs=False)
        assert result.warned_steps == 0
        expected = 2e-5 * (0.01 * 0.01) * 30.0
        assert result.cumulative_inflow == pytest.approx(expected, rel=1e-5)
        # water accumulates near the surface
        h = result.h.values
        assert h[-1] > -10.0
        assert np.all(np.diff(h) >= -1e-9)


class TestBuildMesh:
    def test_vtk_mesh_with_sidecar(self, tmp_path):
        from gwflow.mesh import build_box_mesh
        from gwflow.vtk_legacy import write_vtk_legacy

        mesh = build_box_mesh(2, 2, 2, [(0, 0, 0), (1, 1, 1)])
        write_vtk_legacy(mesh, tmp_path / "box.vtk")
        (tmp_path / "box.patches").write_text(
            "bottom plane axis=z value=0.0 tol=1e-9\n"
            "top plane axis=z value=1.0 tol=1e-9\n"
            "walls remaining\n"
        )
        text = """
[mesh]
type = vtk
path = box.vtk
sidecar = box.patches

[fluid]
[vangenuchten]
alpha = 1.0 1/m
n = 2.0
theta_r = 0.1
theta_s = 0.3

[permeability]
type = uniform
value = 1e-12 m2

[bc.bottom]
type = fixed_head
value = 0 m
[bc.top]
type = zero_flux
[bc.walls]
type = zero_flux

[initial]
type = uniform
head = -1 m

[time]
end = 1 s

[picard]
epsilon = 1e-4 m

[output]
times = 1 s
"""
        cfg = parse_case(text, name="vtkcase")
        mesh2 = build_mesh(cfg.mesh, tmp_path)
        assert set(mesh2.patches) == {"bottom", "top", "walls"}
        result = run_case(cfg, base_dir=tmp_path, write_outputs=False)
        assert result.steps >= 1

    def test_refine_from_config(self):
        cfg = parse_case(SHORT_COLUMN, name="short", overrides=["mesh.refine=1"])
        mesh = build_mesh(cfg.mesh)
        assert mesh.n_cells == 40 * 8

    def test_shipped_real_case_mesh(self):
        cfg = parse_case_file(CASES_DIR / "realCase.case")
        mesh = build_mesh(cfg.mesh)
        assert mesh.n_cells == 72_000
        assert set(mesh.patches) == {"x-", "x+", "y-", "y+", "bottom", "top"}
