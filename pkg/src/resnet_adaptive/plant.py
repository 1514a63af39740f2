"""Plant, reference and disturbance models, including the stock desk-scale set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Vector = np.ndarray


@dataclass(frozen=True)
class PlantModel:
    """``q_ddot = f(q, q_dot) + g(q, q_dot, t) u + omega(t)``."""

    n: int
    m: int
    f: Callable[[Vector, Vector], Vector]
    g: Callable[[Vector, Vector, float], np.ndarray]
    omega: Callable[[float], Vector]
    omega_bar: float = 0.0


@dataclass(frozen=True)
class ReferenceModel:
    """Autonomous reference ``q_d_ddot = f_d(q_d, q_d_dot)`` with known bounds."""

    f_d: Callable[[Vector, Vector], Vector]
    q_d0: Vector
    q_d_dot0: Vector
    q_bar_d: float
    q_dot_bar_d: float

    @property
    def n(self) -> int:
        return len(self.q_d0)


def plant_accel(model: PlantModel, q, q_dot, u, t: float) -> Vector:
    return model.f(q, q_dot) + model.g(q, q_dot, t) @ u + model.omega(t)


def reference_accel(model: ReferenceModel, q_d, q_d_dot) -> Vector:
    return model.f_d(q_d, q_d_dot)


# ---------------------------------------------------------------------------
# Stock models
# ---------------------------------------------------------------------------

_G_OVERACTUATED = np.array([[1.0, 0.0, 0.2], [0.0, 1.0, 0.2]])


def drag_plant(
    c1: float = 0.2,
    c2: float = 1.0,
    overactuated: bool = False,
    disturbance: Callable[[float], Vector] | None = None,
    omega_bar: float = 0.0,
) -> PlantModel:
    """2-D point mass with quadratic drag and a gravity-like ``sin(q)`` term.

    ``overactuated`` swaps the identity input matrix for a 2x3 one.
    """

    def f(q, q_dot):
        return -c1 * q_dot * np.abs(q_dot) - c2 * np.sin(q)

    g_mat = _G_OVERACTUATED if overactuated else np.eye(2)
    g_mat.setflags(write=False)

    def g(q, q_dot, t):
        return g_mat

    if disturbance is None:
        disturbance = no_disturbance(2)
    return PlantModel(2, g_mat.shape[1], f, g, disturbance, omega_bar)


def sinusoid_disturbance(omega_bar: float) -> Callable[[float], Vector]:
    scale = omega_bar / math.sqrt(2.0)

    def omega(t):
        return np.array([scale * math.sin(2.0 * t), scale * math.cos(3.0 * t)])

    return omega


def no_disturbance(n: int) -> Callable[[float], Vector]:
    zero = np.zeros(n)
    zero.setflags(write=False)
    return lambda t: zero


def lissajous_reference(extent_x: float = 15.0, extent_y: float = 5.0, period: float = 60.0) -> ReferenceModel:
    """1:2 figure-eight ``(A sin(wt), B sin(2wt))`` generated by two oscillators."""
    w = 2.0 * math.pi / period
    a, b = extent_x / 2.0, extent_y / 2.0
    w1_sq, w2_sq = w * w, 4.0 * w * w

    def f_d(q_d, q_d_dot):
        return np.array([-w1_sq * q_d[0], -w2_sq * q_d[1]])

    return ReferenceModel(
        f_d=f_d,
        q_d0=np.zeros(2),
        q_d_dot0=np.array([a * w, 2.0 * b * w]),
        q_bar_d=math.hypot(a, b),
        q_dot_bar_d=math.hypot(a * w, 2.0 * b * w),
    )


def lissajous_closed_form(t, extent_x: float = 15.0, extent_y: float = 5.0, period: float = 60.0):
    """Exact ``(q_d, q_d_dot)`` of :func:`lissajous_reference` at times ``t``."""
    t = np.asarray(t, dtype=float)
    w = 2.0 * math.pi / period
    a, b = extent_x / 2.0, extent_y / 2.0
    q = np.stack([a * np.sin(w * t), b * np.sin(2 * w * t)], axis=-1)
    qd = np.stack([a * w * np.cos(w * t), 2 * b * w * np.cos(2 * w * t)], axis=-1)
    return q, qd


def stock_models(
    c1: float = 0.2, c2: float = 1.0, omega_bar: float = 0.5
) -> dict[str, object]:
    dist = sinusoid_disturbance(omega_bar)
    return {
        "drag_plant": drag_plant(c1, c2, disturbance=dist, omega_bar=omega_bar),
        "drag_plant_overactuated": drag_plant(c1, c2, overactuated=True, disturbance=dist, omega_bar=omega_bar),
        "lissajous_reference": lissajous_reference(),
        "sinusoid_disturbance": dist,
    }
