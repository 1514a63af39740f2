"""Projection-based weight adaptation.

The search space is the Euclidean ball ``||theta|| <= radius``.  Inside a thin
shell ``radius*(1 - boundary_layer) <= ||theta|| <= radius`` the outward radial
part of the update direction is faded out linearly, reaching zero on the
sphere, so the ball is forward invariant while the modified direction stays
locally Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ProjectionInvariantError(RuntimeError):
    """The parameter estimate left the search space beyond tolerance."""


# slack for RK4 stage evaluations, which may sit marginally outside the ball
STAGE_TOLERANCE = 1e-6
# post-step drift that is silently pulled back onto the sphere
DRIFT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SearchSpace:
    radius: float
    boundary_layer: float = 0.05  # fraction of radius

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"search-space radius must be positive, got {self.radius}")
        if not 0 < self.boundary_layer < 1:
            raise ValueError(f"boundary_layer must lie in (0, 1), got {self.boundary_layer}")

    @property
    def inner_radius(self) -> float:
        return self.radius * (1.0 - self.boundary_layer)

    def contains(self, theta: np.ndarray, rtol: float = 0.0) -> bool:
        return float(np.linalg.norm(theta)) <= self.radius * (1.0 + rtol)


class LearningRate:
    """Symmetric positive-definite gain, stored as a diagonal when possible."""

    def __init__(self, gamma):
        g = np.asarray(gamma, dtype=np.float64)
        if g.ndim == 0:
            raise ValueError("use LearningRate.scalar(c, p) for a scalar gain")
        if g.ndim == 1:
            if np.any(g <= 0):
                raise ValueError("diagonal learning rate must be strictly positive")
            self.diag = g
            self.matrix = None
        elif g.ndim == 2 and g.shape[0] == g.shape[1]:
            if not np.allclose(g, g.T, rtol=0, atol=1e-14 * max(1.0, np.abs(g).max())):
                raise ValueError("learning rate matrix must be symmetric")
            if np.linalg.eigvalsh(g).min() <= 0:
                raise ValueError("learning rate matrix must be positive definite")
            self.diag = None
            self.matrix = g
        else:
            raise ValueError(f"learning rate must be a vector or square matrix, got shape {g.shape}")

    @classmethod
    def scalar(cls, c: float, p: int) -> "LearningRate":
        return cls(np.full(p, float(c)))

    @property
    def size(self) -> int:
        return self.diag.shape[0] if self.diag is not None else self.matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return self.diag * v
        return self.matrix @ v

    def eigenvalues(self) -> np.ndarray:
        if self.diag is not None:
            return np.sort(self.diag)
        return np.linalg.eigvalsh(self.matrix)

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diag) if self.diag is not None else self.matrix.copy()


def smooth_projection(space: SearchSpace, theta_hat: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Modify the update direction ``tau`` so that ``theta_hat`` stays in ``space``."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    norm_sq = float(theta_hat @ theta_hat)
    norm = np.sqrt(norm_sq)
    if norm > space.radius * (1.0 + STAGE_TOLERANCE):
        raise ProjectionInvariantError(
            f"||theta_hat|| = {norm!r} exceeds search-space radius {space.radius!r}"
        )
    if norm <= space.inner_radius:
        return tau
    outward = float(theta_hat @ tau)
    if outward <= 0.0:
        return tau
    # c = 0 on the inner sphere, 1 on the boundary; not clipped, so the
    # (tolerated) region just outside the ball pulls back inward
    c = (norm - space.inner_radius) / (space.radius - space.inner_radius)
    return tau - (c * outward / norm_sq) * theta_hat


def update_law(
    jac: np.ndarray,
    r: np.ndarray,
    theta_hat: np.ndarray,
    k3: float,
    gamma: LearningRate,
    space: SearchSpace,
) -> np.ndarray:
    """Projected gradient-like update ``proj(Gamma (J^T r - k3 theta_hat))``."""
    jac = np.asarray(jac, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if jac.ndim != 2 or jac.shape[0] != r.shape[0] or jac.shape[1] != theta_hat.shape[0]:
        raise ValueError(
            f"shape mismatch: jac {jac.shape}, r {r.shape}, theta_hat {theta_hat.shape}"
        )
    if gamma.size != theta_hat.shape[0]:
        raise ValueError(f"learning rate has size {gamma.size}, parameters {theta_hat.shape[0]}")
    tau = gamma.apply(jac.T @ r - k3 * theta_hat)
    return smooth_projection(space, theta_hat, tau)


def enforce_drift_rule(space: SearchSpace, theta_hat: np.ndarray) -> np.ndarray:
    """Pull tiny post-step overshoot back onto the sphere; reject anything larger."""
    norm = float(np.linalg.norm(theta_hat))
    if norm <= space.radius:
        return theta_hat
    if norm <= space.radius * (1.0 + DRIFT_TOLERANCE):
        return theta_hat * (space.radius / norm)
    raise ProjectionInvariantError(
        f"integration drift: ||theta_hat|| = {norm!r} > radius {space.radius!r} beyond tolerance"
    )
