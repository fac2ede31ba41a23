"""Van Genuchten-Mualem closures for variably saturated flow.

Everything is SI internally: pressure head h in metres (negative in the
unsaturated zone), capillary capacity in 1/m, hydraulic conductivity in
m/s, intrinsic permeability in m^2. Functions accept scalars or numpy
arrays and broadcast elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VanGenuchtenParams",
    "FluidProps",
    "theta_of_h",
    "effective_saturation",
    "capillary_capacity",
    "kr_of_thetae",
    "mobility",
    "permeability_from_conductivity",
    "conductivity_from_permeability",
]

# Pore-connectivity exponent of the Mualem model; overridable per call.
DEFAULT_PORE_EXPONENT = 0.5


@dataclass(frozen=True)
class VanGenuchtenParams:
    """Retention-curve parameters.

    Parameters
    ----------
    alpha : float
        Inverse air-entry length scale [1/m], > 0.
    n : float
        Pore-size distribution exponent, > 1.
    theta_r, theta_s : float
        Residual and saturated volumetric water content, with
        0 <= theta_r < theta_s <= 1.
    m : float, optional
        Defaults to 1 - 1/n; if given it must match to 1e-12.
    """

    alpha: float
    n: float
    theta_r: float
    theta_s: float
    m: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.n <= 1:
            raise ValueError(f"n must be > 1, got {self.n}")
        if not (0 <= self.theta_r < self.theta_s <= 1):
            raise ValueError(
                f"need 0 <= theta_r < theta_s <= 1, got "
                f"theta_r={self.theta_r}, theta_s={self.theta_s}"
            )
        m_tied = 1.0 - 1.0 / self.n
        if self.m is None:
            object.__setattr__(self, "m", m_tied)
        elif abs(self.m - m_tied) >= 1e-12:
            raise ValueError(f"m={self.m} inconsistent with 1 - 1/n = {m_tied}")


@dataclass(frozen=True)
class FluidProps:
    """Fluid density, viscosity and the gravity vector.

    g is stored as an (gx, gy, gz) tuple in m/s^2; its magnitude must be
    positive.
    """

    rho: float = 1.0e3
    mu: float = 1.0e-3
    g: tuple[float, float, float] = (0.0, 0.0, -9.81)

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        object.__setattr__(self, "g", tuple(float(c) for c in self.g))
        if self.g_mag <= 0:
            raise ValueError("gravity vector must have positive magnitude")

    @property
    def g_vec(self) -> np.ndarray:
        return np.array(self.g, dtype=float)

    @property
    def g_mag(self) -> float:
        return float(np.linalg.norm(self.g))

    @property
    def g_hat(self) -> np.ndarray:
        return self.g_vec / self.g_mag


def theta_of_h(h, p: VanGenuchtenParams):
    """Volumetric water content from pressure head.

    theta = (theta_s - theta_r) * (1 + (alpha*|h|)^n)^(-m) + theta_r for
    h < 0 and theta_s for h >= 0. Continuous and non-decreasing in h.
    """
    h_arr = np.asarray(h, dtype=float)
    x = np.power(p.alpha * np.abs(h_arr), p.n)
    unsat = (p.theta_s - p.theta_r) * np.power(1.0 + x, -p.m) + p.theta_r
    theta = np.where(h_arr < 0.0, unsat, p.theta_s)
    return theta if theta.ndim else float(theta)


def effective_saturation(theta, p: VanGenuchtenParams):
    """Normalized saturation (theta - theta_r)/(theta_s - theta_r) in [0, 1].

    Rejects theta outside [theta_r, theta_s] beyond 1e-12 slack.
    """
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr < p.theta_r - 1e-12) or np.any(theta_arr > p.theta_s + 1e-12):
        raise ValueError(
            f"theta outside [{p.theta_r}, {p.theta_s}]: "
            f"range [{theta_arr.min()}, {theta_arr.max()}]"
        )
    se = (theta_arr - p.theta_r) / (p.theta_s - p.theta_r)
    se = np.clip(se, 0.0, 1.0)
    return se if se.ndim else float(se)


def capillary_capacity(h, p: VanGenuchtenParams):
    """Capillary capacity C(h) = d(theta)/dh in 1/m.

    C = alpha*m*(theta_s - theta_r)/(1 - m) * se^(1/m) * (1 - se^(1/m))^m
    with se the effective saturation at h; zero at and above full
    saturation (h >= 0).
    """
    h_arr = np.asarray(h, dtype=float)
    x = np.power(p.alpha * np.abs(h_arr), p.n)
    # se^(1/m) collapses to 1/(1+x); evaluating it directly avoids the
    # precision loss of chaining pow(pow(1+x, -m), 1/m) near saturation.
    se_pow = 1.0 / (1.0 + x)
    amp = p.alpha * p.m * (p.theta_s - p.theta_r) / (1.0 - p.m)
    cap = amp * se_pow * np.power(1.0 - se_pow, p.m)
    cap = np.where(h_arr < 0.0, cap, 0.0)
    return cap if cap.ndim else float(cap)


def kr_of_thetae(theta_e, p: VanGenuchtenParams, pore_exponent: float = DEFAULT_PORE_EXPONENT):
    """Mualem relative permeability from effective saturation.

    k_r = se^L * (1 - (1 - se^(1/m))^m)^2 with L the pore-connectivity
    exponent (default 0.5). Monotone with k_r(0) = 0 and k_r(1) = 1.
    """
    se = np.asarray(theta_e, dtype=float)
    if np.any(se < -1e-12) or np.any(se > 1.0 + 1e-12):
        raise ValueError(f"theta_e outside [0, 1]: range [{se.min()}, {se.max()}]")
    se = np.clip(se, 0.0, 1.0)
    kr = np.power(se, pore_exponent) * np.square(
        1.0 - np.power(1.0 - np.power(se, 1.0 / p.m), p.m)
    )
    return kr if kr.ndim else float(kr)


def mobility(kr, K, fluid: FluidProps):
    """Phase mobility and total (head-gradient) mobility.

    Returns (M_phase, M_total) with M_phase = K*k_r/mu in m^2/(Pa.s) and
    M_total = M_phase * rho * |g| in m/s per unit head gradient.
    """
    m_phase = np.asarray(K, dtype=float) * np.asarray(kr, dtype=float) / fluid.mu
    m_total = m_phase * fluid.rho * fluid.g_mag
    if np.ndim(m_phase) == 0:
        return float(m_phase), float(m_total)
    return m_phase, m_total


def permeability_from_conductivity(Ks, fluid: FluidProps):
    """Intrinsic permeability K = mu*K_s/(rho*|g|) in m^2."""
    Ks_arr = np.asarray(Ks, dtype=float)
    if np.any(Ks_arr <= 0):
        raise ValueError("saturated conductivity must be > 0")
    K = fluid.mu * Ks_arr / (fluid.rho * fluid.g_mag)
    return K if K.ndim else float(K)


def conductivity_from_permeability(K, fluid: FluidProps):
    """Saturated hydraulic conductivity K_s = rho*|g|*K/mu in m/s."""
    K_arr = np.asarray(K, dtype=float)
    if np.any(K_arr <= 0):
        raise ValueError("permeability must be > 0")
    Ks = K_arr * fluid.rho * fluid.g_mag / fluid.mu
    return Ks if Ks.ndim else float(Ks)
