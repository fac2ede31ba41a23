"""Strong-scaling harness at desk scale.

Runs a fixed number of time steps per thread count (so the measured work
is load-identical), reports median-of-repeats wall times and speedups
against the smallest thread count, and carries a checksum of the final
head field so callers can assert bit-identical results across thread
counts.
"""

from __future__ import annotations

import hashlib
import statistics
import time
import warnings
from dataclasses import dataclass

from .case_io import CaseConfig
from .parallel import max_threads, set_thread_count
from .simulation import build_mesh, build_problem, run_problem

__all__ = ["BenchReport", "bench_case"]

MIN_CELLS_PER_THREAD = 1000


@dataclass
class BenchReport:
    thread_counts: list  # counts actually run
    requested_counts: list
    wall_times: list  # median seconds per fixed-step run
    speedups: list  # sigma_n = T_ref / T_n, reference = smallest count
    cells_per_thread: list
    steps: int
    repeats: int
    n_cells: int
    checksums: list  # sha256 of the final head bytes, per thread count

    def table(self) -> str:
        lines = [
            f"# {self.n_cells} cells, {self.steps} steps, median of {self.repeats} runs",
            f"{'threads':>8} {'cells/thread':>14} {'T_n [s]':>12} {'sigma_n':>9}",
        ]
        for n, cpt, t, s in zip(
            self.thread_counts, self.cells_per_thread, self.wall_times, self.speedups
        ):
            lines.append(f"{n:>8d} {cpt:>14d} {t:>12.4f} {s:>9.3f}")
        return "\n".join(lines)

    def deterministic(self) -> bool:
        return len(set(self.checksums)) <= 1


def bench_case(
    cfg: CaseConfig,
    base_dir=".",
    threads=(1, 2, 4),
    steps: int = 50,
    repeats: int = 3,
) -> BenchReport:
    """Measure fixed-step wall times over a list of thread counts."""
    if steps < 1 or repeats < 1:
        raise ValueError("steps and repeats must be >= 1")
    requested = [int(n) for n in threads]
    if not requested:
        raise ValueError("empty thread list")

    mesh = build_mesh(cfg.mesh, base_dir)
    per_thread_floor = mesh.n_cells // max(requested)
    if per_thread_floor < MIN_CELLS_PER_THREAD:
        raise ValueError(
            f"case too small for a scaling measurement: {per_thread_floor} cells "
            f"per thread at {max(requested)} threads (need >= {MIN_CELLS_PER_THREAD})"
        )

    actual_counts = []
    medians = []
    checksums = []
    for n in requested:
        if n > max_threads():
            warnings.warn(
                f"thread count {n} exceeds the available pool of {max_threads()}; "
                f"running at {max_threads()}",
                RuntimeWarning,
                stacklevel=2,
            )
        active = set_thread_count(n)
        actual_counts.append(active)

        problem, h0 = build_problem(cfg, mesh, base_dir)
        # warm up the jitted kernels outside the timed region
        run_problem(problem, h0, cfg, write_outputs=False, max_steps=1)

        times = []
        final = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            result = run_problem(problem, h0, cfg, write_outputs=False, max_steps=steps)
            times.append(time.perf_counter() - t0)
            final = result
        medians.append(statistics.median(times))
        checksums.append(hashlib.sha256(final.h.values.tobytes()).hexdigest())

    ref_idx = min(range(len(requested)), key=lambda i: requested[i])
    t_ref = medians[ref_idx]
    speedups = [t_ref / t for t in medians]
    return BenchReport(
        thread_counts=actual_counts,
        requested_counts=requested,
        wall_times=medians,
        speedups=speedups,
        cells_per_thread=[mesh.n_cells // max(n, 1) for n in actual_counts],
        steps=steps,
        repeats=repeats,
        n_cells=mesh.n_cells,
        checksums=checksums,
    )
