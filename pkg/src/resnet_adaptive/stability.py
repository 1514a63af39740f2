"""Lyapunov bookkeeping: Rayleigh bounds, ultimate bound, gain condition, sets.

None of this feeds back into the controller.  The quantities are computed from
the gains, the learning rate and user-supplied bounds, then compared against
simulation logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .adaptation import LearningRate
from .control import Gains

BISECT_UPPER = 1e6
BISECT_RTOL = 1e-12


@dataclass(frozen=True)
class StabilityConstants:
    lambda1: float
    lambda_phi: float
    delta: float
    k_min: float
    lambda_V: float
    ultimate_radius: float
    omega_bar: float
    eps_bar: float
    theta_bar: float
    k1: float
    k2: float
    q_bar_d: float
    q_dot_bar_d: float


@dataclass(frozen=True)
class RemainderPolynomial:
    """``rho0(s) = a2 s^2 + a1 s + a0`` bounding the Taylor remainder."""

    a2: float = 0.0
    a1: float = 0.0
    a0: float = 0.0
    theta_bar: float = 1.0

    def __post_init__(self):
        if min(self.a2, self.a1, self.a0) < 0:
            raise ValueError("remainder polynomial coefficients must be nonnegative")

    def __call__(self, s: float) -> float:
        return (self.a2 * s + self.a1) * s + self.a0

    @property
    def degenerate(self) -> bool:
        """``rho0`` is constant, so ``rho - rho(0)`` vanishes identically."""
        return self.a2 == 0 and self.a1 == 0


def rayleigh_bounds(gamma: LearningRate) -> tuple[float, float]:
    eig = gamma.eigenvalues()
    if eig.min() <= 0:
        raise ValueError("learning rate must be positive definite")
    inv = 1.0 / eig
    return min(1.0, float(inv.min())), max(1.0, float(inv.max()))


def compute_delta(omega_bar: float, eps_bar: float, k2: float, k3: float, theta_bar: float) -> float:
    if not k2 > 0:
        raise ValueError(f"k2 must be positive, got {k2}")
    return 3.0 * (omega_bar + eps_bar) ** 2 / (4.0 * k2) + k3 * theta_bar**2 / 2.0


def compute_kmin(gains: Gains) -> float:
    return min(gains.k1, gains.k2 / 3.0, gains.k3 / 2.0)


def ultimate_radius(lambda1: float, lambda_phi: float, delta: float, lambda_V: float) -> float:
    return math.sqrt(lambda_phi * delta / (lambda1 * lambda_V))


def stability_constants(
    gains: Gains,
    gamma: LearningRate,
    omega_bar: float,
    eps_bar: float,
    theta_bar: float,
    q_bar_d: float,
    q_dot_bar_d: float,
    lambda_V: float = 0.1,
) -> StabilityConstants:
    if not lambda_V > 0:
        raise ValueError("lambda_V must be positive")
    l1, lphi = rayleigh_bounds(gamma)
    delta = compute_delta(omega_bar, eps_bar, gains.k2, gains.k3, theta_bar)
    return StabilityConstants(
        lambda1=l1,
        lambda_phi=lphi,
        delta=delta,
        k_min=compute_kmin(gains),
        lambda_V=lambda_V,
        ultimate_radius=ultimate_radius(l1, lphi, delta, lambda_V),
        omega_bar=omega_bar,
        eps_bar=eps_bar,
        theta_bar=theta_bar,
        k1=gains.k1,
        k2=gains.k2,
        q_bar_d=q_bar_d,
        q_dot_bar_d=q_dot_bar_d,
    )


def rho(constants: StabilityConstants, poly: RemainderPolynomial, z_norm: float) -> float:
    """``3 theta_bar^2 rho0((k1 + 2)||z|| + 2(q_bar_d + q_dot_bar_d))^2``."""
    c = constants
    s = (c.k1 + 2.0) * z_norm + 2.0 * (c.q_bar_d + c.q_dot_bar_d)
    return 3.0 * poly.theta_bar**2 * poly(s) ** 2


def rho_bar(constants: StabilityConstants, poly: RemainderPolynomial, z_norm: float) -> float:
    return rho(constants, poly, z_norm) - rho(constants, poly, 0.0)


def rho_bar_inverse(constants: StabilityConstants, poly: RemainderPolynomial, y: float) -> float:
    """Solve ``rho_bar(s) = y`` on ``[0, 1e6]`` by bisection.

    Returns ``inf`` when ``rho_bar`` is identically zero and ``nan`` when
    ``y`` falls outside the bracketed range.
    """
    if poly.degenerate:
        return math.inf
    if y < 0:
        return math.nan
    if y == 0:
        return 0.0
    if rho_bar(constants, poly, BISECT_UPPER) < y:
        return math.nan
    return bisect(lambda s: rho_bar(constants, poly, s) - y, 0.0, BISECT_UPPER, xtol=1e-300, rtol=BISECT_RTOL, maxiter=2000)


@dataclass(frozen=True)
class GainCheck:
    satisfied: bool
    margin: float


def check_gain_condition(constants: StabilityConstants, poly: RemainderPolynomial) -> GainCheck:
    c = constants
    margin = c.k_min - c.lambda_V - rho(c, poly, c.ultimate_radius) / c.k2
    return GainCheck(margin > 0, margin)


@dataclass(frozen=True)
class SetRadii:
    """Radii of the trajectory region, the initial-condition set and the input set.

    ``status`` is ``"ok"``, ``"unconstrained"`` (``rho_bar`` vanishes, so the
    region is all of state space) or ``"infeasible"``.
    """

    status: str
    D_radius: float
    S_radius: float
    Omega_radius: float


def set_radii(constants: StabilityConstants, poly: RemainderPolynomial) -> SetRadii:
    c = constants
    arg = c.k2 * (c.k_min - c.lambda_V) - rho(c, poly, 0.0)
    if arg <= 0:
        return SetRadii("infeasible", math.nan, math.nan, math.nan)
    if poly.degenerate:
        return SetRadii("unconstrained", math.inf, math.inf, math.inf)
    d = rho_bar_inverse(c, poly, arg)
    if not math.isfinite(d):
        return SetRadii("infeasible", math.nan, math.nan, math.nan)
    s = math.sqrt(c.lambda1 / c.lambda_phi) * d - math.sqrt(c.delta / c.lambda_V)
    omega = 2.0 * (c.q_bar_d + c.q_dot_bar_d) + (c.k1 + 2.0) * d
    return SetRadii("ok" if s > 0 else "infeasible", d, s, omega)


def convergence_envelope(constants: StabilityConstants, z0_norm: float, t_minus_t0):
    """Exponential bound on ``||z(t)||`` given ``||z(t0)||``."""
    c = constants
    dt = np.asarray(t_minus_t0, dtype=float)
    if np.any(dt < 0):
        raise ValueError("envelope is defined for t >= t0 only")
    decay = np.exp(-2.0 * c.lambda_V * dt / c.lambda_phi)
    ratio = c.lambda_phi / c.lambda1
    val = np.sqrt(ratio * z0_norm**2 * decay + ratio * c.delta / c.lambda_V * (1.0 - decay))
    return float(val) if val.ndim == 0 else val
