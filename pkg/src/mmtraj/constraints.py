"""Constraint residuals, collision linearization, and slack updates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kinematics import build_f1_blocks, build_f2_in_trig


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned ellipse the base center must stay outside of."""

    center: np.ndarray
    semi_axes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "semi_axes", np.asarray(self.semi_axes, dtype=float).reshape(2))
        if np.any(self.semi_axes <= 0):
            raise ValueError("obstacle semi-axes must be positive")

    def inflated(self, clearance: float) -> "Obstacle":
        return Obstacle(self.center, self.semi_axes + clearance)

    def value(self, points, clearance: float = 0.0):
        """``1 - sum(((x - c) / a)^2)``; non-positive means collision free."""
        a = self.semi_axes + clearance
        z = (np.asarray(points, dtype=float) - self.center) / a
        return 1.0 - np.sum(z * z, axis=-1)


@dataclass
class ConstraintResiduals:
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray | None
    consensus_theta: np.ndarray
    consensus_phi: np.ndarray
    p_consensus: np.ndarray

    def __post_init__(self):
        for name in ("f1", "f2", "f3", "consensus_theta", "consensus_phi", "p_consensus"):
            val = getattr(self, name)
            if val is not None and not np.all(np.isfinite(val)):
                raise FloatingPointError(f"non-finite {name} residual")


def eval_f1(state, problem) -> np.ndarray:
    """Loop-closure residual, shape ``(q, 3)``."""
    P0 = problem.base_basis.P0
    m = problem.base_basis.m
    G, d = build_f1_blocks(state.linkpoints[:, 0, :], problem.chain)
    f1 = np.einsum("tab,tb->ta", G, np.stack([state.v_phi, state.w_phi], axis=-1)) + d
    f1[:, 0] += P0 @ state.c_xb[:m]
    f1[:, 1] += P0 @ state.c_xb[m:]
    return f1 - problem.x_d


def eval_f2(state, problem) -> np.ndarray:
    """Forward-kinematics residual, shape ``(q, 3n)``."""
    G, h = build_f2_in_trig(problem.chain, state.linkpoints)
    vw = np.concatenate([state.v_theta, state.w_theta], axis=1)
    return np.einsum("tab,tb->ta", G, vw) - h


def base_velocity(c_xb, basis):
    m = basis.m
    return basis.P1 @ c_xb[:m], basis.P1 @ c_xb[m:]


def eval_f3(state, problem) -> np.ndarray:
    """No-lateral-slip residual ``xdot * sin(phi) - ydot * cos(phi)`` in trig form."""
    if problem.holonomic:
        raise ValueError("no-slip residual is undefined for a holonomic base")
    xd, yd = base_velocity(state.c_xb, problem.base_basis)
    return xd * state.w_phi - yd * state.v_phi


def linearize_collision(obstacle: Obstacle, base_point, basis, timestep: int, clearance: float = 0.0):
    """Affine upper bound of the concave collision function at one timestep.

    Returns ``(row, rhs)`` with ``row @ c_xb <= rhs`` implying that the base
    position ``(P0[t] @ c_x, P0[t] @ c_y)`` lies outside the inflated ellipse.
    """
    rows, rhs = collision_rows(obstacle, np.asarray(base_point, dtype=float)[None, :],
                               basis.P0[timestep:timestep + 1], clearance)
    return rows[0], rhs[0]


def collision_rows(obstacle: Obstacle, base_points, P0, clearance: float = 0.0):
    """Linearized collision rows for every timestep at once.

    `base_points` has shape ``(q, 2)`` and `P0` shape ``(q, m)``; returns
    ``(q, 2m)`` rows and ``(q,)`` right-hand sides.
    """
    a = obstacle.semi_axes + clearance
    x0 = np.array(base_points, dtype=float)
    z = x0 - obstacle.center
    at_center = np.all(np.abs(z) < 1e-12, axis=-1)
    if np.any(at_center):
        warnings.warn("linearization point at obstacle center; perturbing by 1e-6 m", RuntimeWarning)
        x0[at_center, 0] += 1e-6
        z = x0 - obstacle.center
    g0 = 1.0 - np.sum((z / a) ** 2, axis=-1)
    grad = -2.0 * z / a**2
    rows = np.concatenate([grad[:, :1] * P0, grad[:, 1:] * P0], axis=1)
    rhs = np.sum(grad * x0, axis=-1) - g0
    return rows, rhs


def update_slack(residual_without_slack, multiplier, rho: float):
    """Closed-form non-negative slack for the penalty ``lam (r + s) + rho (r + s)^2``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    r = np.asarray(residual_without_slack, dtype=float)
    return np.maximum(0.0, -r - np.asarray(multiplier, dtype=float) / (2.0 * rho))
