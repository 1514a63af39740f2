"""Fixed-step closed-loop simulation, trajectory logs and tracking metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .adaptation import LearningRate, SearchSpace, enforce_drift_rule
from .control import AdaptiveController, ControllerKind, Gains
from .network import init_params
from .plant import (
    PlantModel,
    ReferenceModel,
    drag_plant,
    lissajous_reference,
    no_disturbance,
    plant_accel,
    reference_accel,
    sinusoid_disturbance,
)

PLANTS = ("drag", "drag_overactuated", "free")
DISTURBANCES = ("sinusoid", "none")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Plant, reference and disturbance selection shared by all controllers."""

    plant: str = "drag"
    c1: float = 0.2
    c2: float = 1.0
    disturbance: str = "sinusoid"
    omega_bar: float = 0.5
    extent_x: float = 15.0
    extent_y: float = 5.0
    period: float = 60.0
    offset: tuple[float, ...] = (1.0, 0.5)

    def build(self) -> tuple[PlantModel, ReferenceModel]:
        if self.disturbance == "sinusoid":
            dist, omega_bar = sinusoid_disturbance(self.omega_bar), self.omega_bar
        elif self.disturbance == "none":
            dist, omega_bar = no_disturbance(2), 0.0
        else:
            raise ValueError(f"unknown disturbance {self.disturbance!r}")
        if self.plant == "drag":
            plant = drag_plant(self.c1, self.c2, disturbance=dist, omega_bar=omega_bar)
        elif self.plant == "drag_overactuated":
            plant = drag_plant(self.c1, self.c2, overactuated=True, disturbance=dist, omega_bar=omega_bar)
        elif self.plant == "free":
            plant = drag_plant(0.0, 0.0, disturbance=dist, omega_bar=omega_bar)
        else:
            raise ValueError(f"unknown plant {self.plant!r}")
        return plant, lissajous_reference(self.extent_x, self.extent_y, self.period)


@dataclass(frozen=True)
class SimConfig:
    controller: ControllerKind
    gains: Gains
    dt: float = 0.02
    duration: float = 360.0
    learning_rate: Union[float, np.ndarray] = 0.025
    search_space: Optional[SearchSpace] = None
    seed: int = 0
    init_scale: float = 0.1
    scenario: Scenario = field(default_factory=Scenario)
    stride: int = 1
    zoh: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        if self.duration > 0 and self.dt > self.duration:
            raise ValueError("dt must not exceed duration")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.controller.network is not None and self.search_space is None:
            raise ValueError("network controllers need a search space")

    @property
    def num_steps(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))


@dataclass
class TrajectoryLog:
    t: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    q_d: np.ndarray
    q_d_dot: np.ndarray
    e: np.ndarray
    r: np.ndarray
    u: np.ndarray
    theta_norm: np.ndarray
    theta_final: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.t)

    @property
    def e_norm(self) -> np.ndarray:
        return np.linalg.norm(self.e, axis=1)

    @property
    def r_norm(self) -> np.ndarray:
        return np.linalg.norm(self.r, axis=1)

    @property
    def er_norm(self) -> np.ndarray:
        """``sqrt(||e||^2 + ||r||^2)``, the computable part of ``||z||``."""
        return np.sqrt(np.sum(self.e**2, axis=1) + np.sum(self.r**2, axis=1))


class ClosedLoop:
    """Plant + reference + controller + adaptation as one vector field.

    State layout: ``[q, q_dot, q_d, q_d_dot, theta_hat]``.
    """

    def __init__(self, plant: PlantModel, reference: ReferenceModel, controller: AdaptiveController):
        if plant.n != reference.n:
            raise ValueError("plant and reference dimensions differ")
        self.plant = plant
        self.reference = reference
        self.controller = controller
        self.n = plant.n

    def split(self, x: np.ndarray):
        n = self.n
        return x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n : 4 * n], x[4 * n :]

    def initial_state(self, offset: Sequence[float], theta0: np.ndarray) -> np.ndarray:
        ref = self.reference
        q0 = ref.q_d0 + np.asarray(offset, dtype=float)
        return np.concatenate([q0, ref.q_d_dot0, ref.q_d0, ref.q_d_dot0, theta0])

    def evaluate(self, x: np.ndarray, t: float):
        """State derivative together with ``(u, e, r)`` at ``(x, t)``."""
        q, q_dot, q_d, q_d_dot, theta = self.split(x)
        u, theta_dot, e, r = self.controller(q, q_dot, q_d, q_d_dot, t, theta)
        dx = np.concatenate(
            [
                q_dot,
                plant_accel(self.plant, q, q_dot, u, t),
                q_d_dot,
                reference_accel(self.reference, q_d, q_d_dot),
                theta_dot,
            ]
        )
        return dx, u, e, r

    def derivative(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.evaluate(x, t)[0]


def closed_loop_derivative(state: np.ndarray, t: float, loop: ClosedLoop) -> np.ndarray:
    return loop.derivative(state, t)


def rk4_step(
    fn: Callable[[np.ndarray, float], np.ndarray],
    x: np.ndarray,
    t: float,
    dt: float,
    k1: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Classical Runge-Kutta step; ``k1`` may be passed in if already known."""
    if k1 is None:
        k1 = fn(x, t)
    half = 0.5 * dt
    k2 = fn(x + half * k1, t + half)
    k3 = fn(x + half * k2, t + half)
    k4 = fn(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def build_controller(config: SimConfig, plant: PlantModel) -> AdaptiveController:
    kind = config.controller
    if kind.network is None:
        return AdaptiveController.from_kind(kind, config.gains, plant.g)
    from .network import param_count

    p = param_count(kind.network)
    lr = config.learning_rate
    gamma = LearningRate(np.asarray(lr, dtype=float)) if np.ndim(lr) else LearningRate.scalar(lr, p)
    return AdaptiveController.from_kind(kind, config.gains, plant.g, gamma, config.search_space)


def initial_weights(config: SimConfig) -> np.ndarray:
    kind = config.controller
    if kind.network is None:
        return np.zeros(0)
    rng = np.random.default_rng(config.seed)
    return init_params(kind.network, rng, config.init_scale, config.search_space.inner_radius).theta


def run_simulation(
    config: SimConfig,
    plant: Optional[PlantModel] = None,
    reference: Optional[ReferenceModel] = None,
    theta0: Optional[np.ndarray] = None,
    controller: Optional[AdaptiveController] = None,
) -> TrajectoryLog:
    """Integrate the closed loop; ``plant``/``reference``/``theta0``/``controller`` override the config."""
    if plant is None or reference is None:
        built_plant, built_ref = config.scenario.build()
        plant = plant or built_plant
        reference = reference or built_ref
    if controller is None:
        controller = build_controller(config, plant)
    loop = ClosedLoop(plant, reference, controller)
    if theta0 is None:
        theta0 = initial_weights(config)
    x = loop.initial_state(config.scenario.offset, np.asarray(theta0, dtype=float))
    n, m = plant.n, plant.m
    space = config.search_space
    steps, dt, stride = config.num_steps, config.dt, config.stride
    rows = steps // stride + 1

    t_log = np.empty(rows)
    q_log, qdot_log, qd_log, qddot_log, e_log, r_log = (np.empty((rows, n)) for _ in range(6))
    u_log = np.empty((rows, m))
    th_log = np.empty(rows)

    def record(row, t, x, u, e, r):
        q, q_dot, q_d, q_d_dot, theta = loop.split(x)
        t_log[row] = t
        q_log[row], qdot_log[row], qd_log[row], qddot_log[row] = q, q_dot, q_d, q_d_dot
        e_log[row], r_log[row], u_log[row] = e, r, u
        th_log[row] = np.linalg.norm(theta)

    t = 0.0
    row = 0
    n_state = 4 * n
    for step in range(steps + 1):
        t = step * dt
        try:
            k1, u, e, r = loop.evaluate(x, t)
        except Exception as exc:
            raise SimulationError(f"step {step} (t={t:.4f}): {exc}") from exc
        if step % stride == 0:
            record(row, t, x, u, e, r)
            row += 1
        if step == steps:
            break
        try:
            if config.zoh:
                x = _zoh_step(loop, x, t, dt, u, k1, space)
            else:
                x = rk4_step(loop.derivative, x, t, dt, k1)
                if space is not None:
                    x[n_state:] = enforce_drift_rule(space, x[n_state:])
        except Exception as exc:
            raise SimulationError(f"step {step} (t={t:.4f}): {exc}") from exc

    return TrajectoryLog(
        t_log, q_log, qdot_log, qd_log, qddot_log, e_log, r_log, u_log, th_log,
        theta_final=loop.split(x)[4].copy(),
    )


def _zoh_step(loop: ClosedLoop, x, t, dt, u, k1, space):
    """Hold ``u`` and the weight rate over the step (sampled-data controller)."""
    n4 = 4 * loop.n
    plant, ref = loop.plant, loop.reference
    n = loop.n

    def physics(y, s):
        q, q_dot, q_d, q_d_dot = y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n :]
        return np.concatenate(
            [q_dot, plant_accel(plant, q, q_dot, u, s), q_d_dot, reference_accel(ref, q_d, q_d_dot)]
        )

    y = rk4_step(physics, x[:n4], t, dt, k1[:n4])
    theta = x[n4:] + dt * k1[n4:]
    if space is not None:
        norm = np.linalg.norm(theta)
        if norm > space.radius:
            theta = theta * (space.radius / norm)
    return np.concatenate([y, theta])


# ---------------------------------------------------------------------------
# Metrics and CSV
# ---------------------------------------------------------------------------


def percent_improvement(base: float, ours: float) -> float:
    return 100.0 * (base - ours) / base


def error_metrics(t: np.ndarray, e_norm: np.ndarray, theta_norm: np.ndarray) -> dict[str, float]:
    if len(t) == 0:
        raise ValueError("empty log")
    e_norm = np.asarray(e_norm, dtype=float)
    t = np.asarray(t, dtype=float)
    window = t >= t[-1] - 0.2 * (t[-1] - t[0])
    return {
        "rms_error": float(np.sqrt(np.mean(e_norm**2))),
        "mean_error": float(np.mean(e_norm)),
        "final_window_rms": float(np.sqrt(np.mean(e_norm[window] ** 2))),
        "max_theta_norm": float(np.max(theta_norm)),
    }


def metrics(log: TrajectoryLog) -> dict[str, float]:
    return error_metrics(log.t, log.e_norm, log.theta_norm)


def csv_header(n: int, m: int) -> list[str]:
    return (
        ["t"]
        + [f"q{i + 1}" for i in range(n)]
        + [f"qd{i + 1}" for i in range(n)]
        + ["e_norm", "r_norm", "theta_hat_norm"]
        + [f"u{i + 1}" for i in range(m)]
    )


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def write_csv(log: TrajectoryLog, path: Union[str, Path]) -> None:
    n, m = log.q.shape[1], log.u.shape[1]
    cols = np.column_stack(
        [log.t, log.q, log.q_d, log.e_norm, log.r_norm, log.theta_norm, log.u]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(n, m))
        for rec in cols:
            w.writerow([_fmt(v) for v in rec])


def read_csv(path: Union[str, Path]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def csv_metrics(path: Union[str, Path]) -> dict[str, float]:
    """Metrics recomputed from the rounded values stored in a CSV log."""
    cols = read_csv(path)
    return error_metrics(cols["t"], cols["e_norm"], cols["theta_hat_norm"])
