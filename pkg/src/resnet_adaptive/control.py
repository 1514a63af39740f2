"""Tracking-error signals and the adaptive tracking control law.

The controller only ever sees ``(q, q_dot, q_d, q_d_dot, t, theta_hat)`` and
the known input matrix ``g``; the drift and disturbance of the plant are not
reachable from here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .adaptation import LearningRate, SearchSpace, update_law
from .network import NetworkSpec, ParamLayout, ParamVector, dnn_eval, resnet_eval

CONTROLLER_KINDS = ("PD", "SNN", "DNN", "ResNet")
SINGULARITY_THRESHOLD = 1e12


class SingularityError(np.linalg.LinAlgError):
    """``g g^T`` is too ill-conditioned to invert."""


def _same_length(*vs):
    n = vs[0].shape[0]
    for v in vs[1:]:
        if v.shape != (n,):
            raise ValueError(f"length mismatch: {[v.shape for v in vs]}")


@dataclass(frozen=True)
class Gains:
    k1: float
    k2: float
    k3: float = 0.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not self.k2 > 0:
            raise ValueError(f"k2 must be positive, got {self.k2}")
        if not self.k3 >= 0:
            raise ValueError(f"k3 must be nonnegative, got {self.k3}")


@dataclass(frozen=True)
class ControllerKind:
    tag: str
    network: Optional[NetworkSpec] = None

    def __post_init__(self):
        if self.tag not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.tag!r}")
        net = self.network
        if self.tag == "PD":
            if net is not None:
                raise ValueError("PD controller takes no network")
            return
        if net is None:
            raise ValueError(f"{self.tag} controller needs a network")
        b = net.num_residual_blocks
        if self.tag == "SNN" and (b != 0 or net.blocks[0].depth != 1):
            raise ValueError("SNN must be a single block with one hidden layer")
        if self.tag == "DNN" and b != 0:
            raise ValueError("DNN must have no residual blocks")
        if self.tag == "ResNet" and b < 1:
            raise ValueError("ResNet requires at least one residual block")


def tracking_error(q_d, q) -> np.ndarray:
    q_d, q = np.asarray(q_d, dtype=float), np.asarray(q, dtype=float)
    _same_length(q_d, q)
    return q_d - q


def filtered_error(e_dot, e, k1: float) -> np.ndarray:
    e_dot, e = np.asarray(e_dot, dtype=float), np.asarray(e, dtype=float)
    _same_length(e_dot, e)
    return e_dot + k1 * e


def assemble_regressor(q, q_dot, q_d, q_d_dot) -> np.ndarray:
    parts = [np.asarray(v, dtype=float) for v in (q, q_dot, q_d, q_d_dot)]
    _same_length(*parts)
    return np.concatenate(parts)


def pseudoinverse(g) -> np.ndarray:
    """Right pseudoinverse ``g^T (g g^T)^{-1}`` of a full-row-rank matrix."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] > g.shape[1]:
        raise SingularityError(f"need a wide or square matrix, got shape {g.shape}")
    ggt = g @ g.T
    if np.linalg.cond(ggt) > SINGULARITY_THRESHOLD:
        raise SingularityError("g g^T is singular to working precision")
    return g.T @ np.linalg.inv(ggt)


def control_input(e, r, psi_hat, g, gains: Gains) -> np.ndarray:
    """``u = g^+ ((1 - k1^2) e + (k1 + k2) r + psi_hat)``."""
    k1, k2 = gains.k1, gains.k2
    return pseudoinverse(g) @ ((1.0 - k1 * k1) * e + (k1 + k2) * r + psi_hat)


class AdaptiveController:
    """Control law plus weight adaptation for one network (or none, for PD).

    ``residual`` selects the evaluation path: ``True`` runs the full ResNet
    recursion, ``False`` treats the network as a single plain DNN block.
    """

    def __init__(
        self,
        gains: Gains,
        g: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
        network: Optional[NetworkSpec] = None,
        gamma: Optional[LearningRate] = None,
        space: Optional[SearchSpace] = None,
        residual: bool = True,
    ):
        self.gains = gains
        self.g = g
        self.network = network
        self.gamma = gamma
        self.space = space
        self.residual = residual
        self._pinv_of = None
        self._pinv = None
        if network is None:
            self.layout = None
            self.num_params = 0
            return
        if gamma is None or space is None:
            raise ValueError("network controllers need a learning rate and a search space")
        if not residual and network.num_residual_blocks:
            raise ValueError("plain DNN path cannot evaluate residual blocks")
        self.layout = ParamLayout.of(network)
        self.num_params = self.layout.size
        if gamma.size != self.num_params:
            raise ValueError(f"learning rate size {gamma.size} != parameter count {self.num_params}")

    @classmethod
    def from_kind(cls, kind: ControllerKind, gains, g, gamma=None, space=None) -> "AdaptiveController":
        return cls(gains, g, kind.network, gamma, space, residual=kind.tag == "ResNet")

    def _pseudoinverse(self, g: np.ndarray) -> np.ndarray:
        # read-only input matrices are treated as constants and inverted once
        if g is self._pinv_of:
            return self._pinv
        pinv = pseudoinverse(g)
        if isinstance(g, np.ndarray) and not g.flags.writeable:
            self._pinv_of, self._pinv = g, pinv
        return pinv

    def network_eval(self, kappa: np.ndarray, theta_hat: np.ndarray):
        pv = ParamVector(theta_hat, self.layout)
        if self.residual:
            return resnet_eval(self.network, pv, kappa)
        return dnn_eval(self.network.blocks[0], pv, kappa)

    def __call__(self, q, q_dot, q_d, q_d_dot, t, theta_hat):
        """Return ``(u, theta_hat_dot, e, r)``."""
        e = q_d - q
        r = (q_d_dot - q_dot) + self.gains.k1 * e
        g_pinv = self._pseudoinverse(self.g(q, q_dot, t))
        k1, k2 = self.gains.k1, self.gains.k2
        v = (1.0 - k1 * k1) * e + (k1 + k2) * r
        if self.network is None:
            return g_pinv @ v, np.zeros(0), e, r
        kappa = assemble_regressor(q, q_dot, q_d, q_d_dot)
        psi_hat, jac = self.network_eval(kappa, theta_hat)
        u = g_pinv @ (v + psi_hat)
        theta_dot = update_law(jac, r, theta_hat, self.gains.k3, self.gamma, self.space)
        return u, theta_dot, e, r
