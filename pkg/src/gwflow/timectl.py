"""Heuristic adaptive time-step controller.

After every converged nonlinear step, the Picard iteration count decides
one of three branches: shrink the step (too many iterations), keep it,
or count a fast step toward an increase. Only after ``n_stab``
*consecutive* fast steps does the step grow; the counter resets on any
non-fast step so sporadic easy steps never trigger growth.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TimeControlConfig", "ControllerState", "next_dt"]


@dataclass(frozen=True)
class TimeControlConfig:
    """Iteration thresholds, growth/shrink factors and step bounds."""

    n_min_iter: int = 3
    n_max_iter: int = 8
    n_stab: int = 5
    f_increase: float = 1.3
    f_decrease: float = 0.7
    dt_init: float = 1.0
    dt_min: float = 1e-4
    dt_max: float = 86400.0

    def __post_init__(self):
        if not (1 <= self.n_min_iter <= self.n_max_iter):
            raise ValueError(
                f"need 1 <= n_min_iter <= n_max_iter, got "
                f"({self.n_min_iter}, {self.n_max_iter})"
            )
        if self.n_stab < 1:
            raise ValueError(f"n_stab must be >= 1, got {self.n_stab}")
        if self.f_increase <= 1.0:
            raise ValueError(f"f_increase must be > 1, got {self.f_increase}")
        if not (0.0 < self.f_decrease < 1.0):
            raise ValueError(f"f_decrease must be in (0, 1), got {self.f_decrease}")
        if not (0.0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got "
                f"({self.dt_min}, {self.dt_init}, {self.dt_max})"
            )

    def initial_state(self) -> "ControllerState":
        return ControllerState(dt=self.dt_init, stab_counter=0)


@dataclass(frozen=True)
class ControllerState:
    """Current step size and the consecutive-fast-step counter."""

    dt: float
    stab_counter: int = 0


def next_dt(state: ControllerState, n_iter: int, cfg: TimeControlConfig) -> ControllerState:
    """Pure transition: controller state after a step that converged in
    ``n_iter`` Picard iterations. dt never leaves [dt_min, dt_max]."""
    if n_iter < 1:
        raise ValueError(f"n_iter must be >= 1, got {n_iter}")

    def clamp(dt: float) -> float:
        return min(max(dt, cfg.dt_min), cfg.dt_max)

    if n_iter > cfg.n_max_iter:
        return ControllerState(dt=clamp(cfg.f_decrease * state.dt), stab_counter=0)
    if n_iter >= cfg.n_min_iter:
        return ControllerState(dt=clamp(state.dt), stab_counter=0)
    counter = state.stab_counter + 1
    if counter >= cfg.n_stab:
        return ControllerState(dt=clamp(cfg.f_increase * state.dt), stab_counter=0)
    return ControllerState(dt=clamp(state.dt), stab_counter=counter)
