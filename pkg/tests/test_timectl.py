import numpy as np
import pytest

from gwflow.timectl import ControllerState, TimeControlConfig, next_dt


def cfg(**kwargs):
    base = dict(n_min_iter=3, n_max_iter=8, n_stab=5,
                f_increase=1.3, f_decrease=0.5,
                dt_init=10.0, dt_min=1e-4, dt_max=86400.0)
    base.update(kwargs)
    return TimeControlConfig(**base)


class TestBranches:
    def test_too_many_iterations_shrinks(self):
        # (dt=10, counter=0), n_iter=9 > n_max=8 -> dt=5, counter=0
        state = next_dt(ControllerState(10.0, 0), 9, cfg(f_decrease=0.5))
        assert state == ControllerState(5.0, 0)

    def test_in_band_keeps_dt(self):
        # n_min=3 <= n_iter=5 <= n_max=8 -> unchanged
        state = next_dt(ControllerState(10.0, 0), 5, cfg())
        assert state == ControllerState(10.0, 0)

    def test_counter_reaches_threshold_grows(self):
        # counter=4 with n_stab=5: fifth fast step triggers the increase
        state = next_dt(ControllerState(10.0, 4), 2, cfg(f_increase=1.3))
        assert state.dt == pytest.approx(13.0)
        assert state.stab_counter == 0

    def test_counter_increments_below_threshold(self):
        state = next_dt(ControllerState(10.0, 2), 2, cfg())
        assert state == ControllerState(10.0, 3)

    def test_in_band_resets_counter(self):
        state = next_dt(ControllerState(10.0, 4), 5, cfg())
        assert state.stab_counter == 0

    def test_shrink_resets_counter(self):
        state = next_dt(ControllerState(10.0, 4), 20, cfg())
        assert state.stab_counter == 0

    def test_n_iter_must_be_positive(self):
        with pytest.raises(ValueError):
            next_dt(ControllerState(10.0, 0), 0, cfg())


class TestClamping:
    def test_shrink_clamped_at_dt_min(self):
        state = next_dt(ControllerState(1.5e-4, 0), 99, cfg())
        assert state.dt == cfg().dt_min

    def test_growth_clamped_at_dt_max(self):
        c = cfg(dt_max=11.0)
        state = next_dt(ControllerState(10.0, 4), 1, c)
        assert state.dt == 11.0


class TestRandomizedSequences:
    def test_bounds_and_consecutive_rule(self):
        rng = np.random.default_rng(1234)
        for trial in range(20):
            c = cfg(
                n_min_iter=int(rng.integers(1, 5)),
                n_max_iter=int(rng.integers(5, 12)),
                n_stab=int(rng.integers(1, 8)),
                f_increase=float(rng.uniform(1.05, 2.0)),
                f_decrease=float(rng.uniform(0.3, 0.95)),
                dt_init=float(rng.uniform(1e-3, 1e3)),
                dt_min=1e-4,
                dt_max=1e4,
            )
            state = c.initial_state()
            fast_streak = 0
            for _ in range(500):
                n_iter = int(rng.integers(1, 2 * c.n_max_iter + 2))
                prev = state
                state = next_dt(state, n_iter, c)
                assert c.dt_min <= state.dt <= c.dt_max
                assert 0 <= state.stab_counter < c.n_stab
                if n_iter < c.n_min_iter:
                    fast_streak += 1
                else:
                    fast_streak = 0
                grew = state.dt > prev.dt
                if grew:
                    # growth only on the n_stab-th consecutive fast step
                    assert fast_streak > 0 and fast_streak % c.n_stab == 0
                if fast_streak > 0 and fast_streak % c.n_stab == 0:
                    expected = min(max(c.f_increase * prev.dt, c.dt_min), c.dt_max)
                    assert state.dt == pytest.approx(expected)

    def test_total_transition_volume(self):
        # 1e4 transitions stay within bounds (flat sequence, one config)
        rng = np.random.default_rng(99)
        c = cfg()
        state = c.initial_state()
        for n_iter in rng.integers(1, 20, size=10_000):
            state = next_dt(state, int(n_iter), c)
            assert c.dt_min <= state.dt <= c.dt_max
            assert 0 <= state.stab_counter < c.n_stab


class TestDeterminismAndValidation:
    def test_pure_function(self):
        c = cfg()
        s = ControllerState(10.0, 2)
        assert next_dt(s, 2, c) == next_dt(s, 2, c)
        assert s == ControllerState(10.0, 2)  # input untouched

    @pytest.mark.parametrize("bad", [
        dict(n_min_iter=9, n_max_iter=8),
        dict(n_stab=0),
        dict(f_increase=1.0),
        dict(f_decrease=1.0),
        dict(dt_min=0.0),
        dict(dt_init=1e6, dt_max=1e3),
    ])
    def test_invalid_config_rejected(self, bad):
        with pytest.raises(ValueError):
            cfg(**bad)
