import math

import numpy as np
import pytest

from gwflow.constitutive import (
    FluidProps,
    VanGenuchtenParams,
    capillary_capacity,
    conductivity_from_permeability,
    effective_saturation,
    kr_of_thetae,
    mobility,
    permeability_from_conductivity,
    theta_of_h,
)



class TestVanGenuchtenParams:
    def test_m_defaults_to_tied_value(self):
        p = VanGenuchtenParams(alpha=3.35, n=2.0, theta_r=0.102, theta_s=0.368)
        assert p.m == pytest.approx(0.5, abs=1e-15)

    def test_inconsistent_m_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            VanGenuchtenParams(alpha=3.35, n=2.0, theta_r=0.102, theta_s=0.368, m=0.6)

    @pytest.mark.parametrize("kwargs", [
        dict(alpha=-1.0, n=2.0, theta_r=0.1, theta_s=0.3),
        dict(alpha=1.0, n=1.0, theta_r=0.1, theta_s=0.3),
        dict(alpha=1.0, n=2.0, theta_r=0.3, theta_s=0.3),
        dict(alpha=1.0, n=2.0, theta_r=0.1, theta_s=1.2),
    ])
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            VanGenuchtenParams(**kwargs)


class TestThetaOfH:
    def test_paper_golden_values(self, vg):
        assert theta_of_h(-0.75, vg) == pytest.approx(0.20037, abs=5e-5)
        assert theta_of_h(-10.0, vg) == pytest.approx(0.10994, abs=5e-5)
        assert theta_of_h(-5.0, vg) == pytest.approx(0.118, abs=1e-3)

    def test_saturated_branch(self, vg):
        assert theta_of_h(0.0, vg) == vg.theta_s
        assert theta_of_h(2.5, vg) == vg.theta_s

    def test_continuity_at_zero(self, vg):
        assert abs(theta_of_h(-1e-9, vg) - vg.theta_s) < 1e-9

    def test_monotone_non_decreasing(self, vg):
        h = np.linspace(-50.0, 1.0, 4001)
        theta = theta_of_h(h, vg)
        assert np.all(np.diff(theta) >= 0)

    def test_range(self, vg):
        h = np.concatenate([-np.logspace(-6, 5, 200), [0.0, 3.0]])
        theta = theta_of_h(h, vg)
        assert np.all(theta > vg.theta_r)
        assert np.all(theta <= vg.theta_s)


class TestEffectiveSaturation:
    def test_endpoints(self, vg):
        assert effective_saturation(vg.theta_s, vg) == 1.0
        assert effective_saturation(vg.theta_r, vg) == 0.0

    def test_derived_value(self, vg):
        # direct arithmetic: (0.20037 - 0.102) / 0.266
        expected = (0.20037 - 0.102) / (0.368 - 0.102)
        assert effective_saturation(0.20037, vg) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.36981, abs=5e-6)

    def test_out_of_range_rejected(self, vg):
        with pytest.raises(ValueError, match="outside"):
            effective_saturation(0.5, vg)
        with pytest.raises(ValueError, match="outside"):
            effective_saturation(0.10, vg)

    def test_slack_tolerated(self, vg):
        assert effective_saturation(vg.theta_s + 5e-13, vg) == 1.0


class TestCapillaryCapacity:
    def test_zero_at_saturation(self, vg):
        assert capillary_capacity(0.0, vg) == 0.0
        assert capillary_capacity(1.5, vg) == 0.0

    @pytest.mark.parametrize("h", [-0.75, -10.0])
    def test_matches_centered_difference(self, vg, h):
        # independent oracle: centered finite difference of theta, step 1e-6 m
        step = 1e-6
        fd = (theta_of_h(h + step, vg) - theta_of_h(h - step, vg)) / (2 * step)
        assert capillary_capacity(h, vg) == pytest.approx(fd, rel=1e-7)

    def test_derived_magnitudes(self, vg):
        assert capillary_capacity(-0.75, vg) == pytest.approx(0.11323, abs=2e-5)
        assert capillary_capacity(-10.0, vg) == pytest.approx(7.93e-4, rel=2e-3)

    def test_derivative_identity_over_range(self, vg):
        # acceptance-grade property: C(h) == dtheta/dh to 1e-6 of max(C)
        h = -np.logspace(np.log10(0.01), np.log10(50.0), 1000)
        cap = capillary_capacity(h, vg)
        step = 1e-6
        fd = (theta_of_h(h + step, vg) - theta_of_h(h - step, vg)) / (2 * step)
        assert np.max(np.abs(cap - fd)) / np.max(cap) < 1e-6

    def test_non_negative(self, vg):
        h = np.linspace(-80, 2, 5000)
        assert np.all(capillary_capacity(h, vg) >= 0)


class TestRelativePermeability:
    def test_endpoints(self, vg):
        assert kr_of_thetae(0.0, vg) == 0.0
        assert kr_of_thetae(1.0, vg) == 1.0

    def test_derived_value_at_half(self, vg):
        # closed form for m = 0.5: sqrt(0.5) * (1 - sqrt(0.75))^2
        expected = math.sqrt(0.5) * (1.0 - math.sqrt(0.75)) ** 2
        assert kr_of_thetae(0.5, vg) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.012692, abs=1e-6)

    def test_monotone_and_bounded(self, vg):
        se = np.linspace(0.0, 1.0, 2001)
        kr = kr_of_thetae(se, vg)
        assert np.all(np.diff(kr) >= 0)
        assert np.all((kr >= 0) & (kr <= 1))

    def test_out_of_range_rejected(self, vg):
        with pytest.raises(ValueError, match="outside"):
            kr_of_thetae(1.5, vg)

    def test_pore_exponent_override(self, vg):
        assert kr_of_thetae(0.5, vg, pore_exponent=1.0) == pytest.approx(
            0.5 * (1.0 - math.sqrt(0.75)) ** 2, rel=1e-12
        )


class TestMobilityAndPermeability:
    def test_saturated_mobility_equals_ks(self, fluid):
        # at kr=1 the total mobility is the saturated conductivity
        m_phase, m_total = mobility(1.0, 9.4e-12, fluid)
        assert m_phase == pytest.approx(9.4e-12 / 1e-3, rel=1e-12)
        assert m_total == pytest.approx(9.22e-5, rel=2e-3)

    def test_zero_kr(self, fluid):
        assert mobility(0.0, 1e-12, fluid) == (0.0, 0.0)

    def test_phase_mobility_arithmetic(self, fluid):
        m_phase, _ = mobility(0.5, 2e-12, fluid)
        assert m_phase == pytest.approx(1e-9, rel=1e-12)

    def test_paper_permeability_value(self, fluid):
        K = permeability_from_conductivity(9.22e-5, fluid)
        assert K == pytest.approx(9.4e-12, abs=1e-13)

    def test_round_trip(self, fluid):
        Ks = 9.22e-5
        assert conductivity_from_permeability(
            permeability_from_conductivity(Ks, fluid), fluid
        ) == pytest.approx(Ks, rel=1e-14)

    def test_cancellation_identity(self, fluid):
        # mu*Ks/(rho*|g|) with Ks = 9.81e-3: the 9.81 factors cancel
        assert permeability_from_conductivity(9.81e-3, fluid) == pytest.approx(
            1e-9, rel=1e-12
        )

    def test_nonpositive_rejected(self, fluid):
        with pytest.raises(ValueError):
            permeability_from_conductivity(0.0, fluid)
        with pytest.raises(ValueError):
            conductivity_from_permeability(-1e-12, fluid)


class TestFluidProps:
    def test_gravity_vector_properties(self):
        f = FluidProps(rho=1000.0, mu=1e-3, g=(0.0, 0.0, -9.81))
        assert f.g_mag == pytest.approx(9.81)
        np.testing.assert_allclose(f.g_hat, [0.0, 0.0, -1.0])

    @pytest.mark.parametrize("kwargs", [
        dict(rho=-1.0), dict(mu=0.0), dict(g=(0.0, 0.0, 0.0)),
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FluidProps(**kwargs)
