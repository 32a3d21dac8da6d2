"""ADMM over multi-affine blocks: every step is an unconstrained convex QP.

One outer iteration runs, in order:

1. joint coefficients (one QP per joint),
2. the arm block: link points, joint cosine/sine copies, joint angles,
3. the base block: base coefficients, heading cosine/sine copies, heading,
4. slack updates, then multiplier and penalty updates.

All multiplier terms are written ``lam^T r + rho ||r||^2`` so a dual step is
``lam += 2 rho r``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constraints import (ConstraintResiduals, base_velocity, collision_rows, eval_f1,
                          eval_f2, eval_f3, update_slack)
from .kinematics import build_f1_blocks, heading_rotation, mount_point
from .linalg import QuadraticForm, accumulate_least_squares, accumulate_penalty, solve_convex_qp
from .trajectory import (build_basis, build_boundary_matrices, build_limit_matrices,
                         planar_block)

logger = logging.getLogger(__name__)

FAMILIES = ("f1", "f2", "f3", "p", "G", "A", "Gx", "coll", "vw", "vw_phi")

DEFAULT_RHO = {fam: 1.0 for fam in FAMILIES}
DEFAULT_RHO["coll"] = 10.0


class SolverAbort(FloatingPointError):
    """Raised when an iterate becomes non-finite; carries the offending state."""

    def __init__(self, message, state=None, iteration=None):
        super().__init__(message)
        self.state = state
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Iteration limits, penalties and weights.

    `w1` / `w2` override the scenario weights when given. `backend` picks the
    kernel implementation (``"numba"`` / ``"numpy"``); None uses the process default.
    """

    w1: float | None = None
    w2: float | None = None
    max_iter: int = 100
    residual_tol: float = 1e-3
    rho_init: dict = field(default_factory=dict)
    rho_scale: float = 1.25
    rho_max: float = 1e4
    rho_stall: float = 0.95
    regularization: float | None = None
    parallel: bool = False
    backend: str | None = None
    audit_collisions: bool = False
    theta_init: np.ndarray | None = None

    def __post_init__(self):
        rho = dict(DEFAULT_RHO)
        rho.update(self.rho_init or {})
        unknown = set(rho) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown penalty families {sorted(unknown)}")
        self.rho_init = rho
        for name in ("w1", "w2"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if any(not r > 0 for r in rho.values()):
            raise ValueError("penalties must be positive")
        if not self.rho_scale > 1:
            raise ValueError("rho_scale must exceed 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        data = dict(data)
        if data.get("theta_init") is not None:
            data["theta_init"] = np.asarray(data["theta_init"], dtype=float)
        return cls(**data)


@dataclass
class Problem:
    """Scenario data compiled into the matrices the steps consume."""

    chain: object
    joint_basis: object
    base_basis: object
    x_d: np.ndarray
    holonomic: bool
    w1: float
    w2: float
    G_theta: np.ndarray
    h_theta: np.ndarray
    limits: list
    G_xb: np.ndarray
    h_xb: np.ndarray
    obstacles: list
    clearance: float
    # stacked chain arrays for the kernels
    A0: np.ndarray = None
    Ac: np.ndarray = None
    As: np.ndarray = None
    t: np.ndarray = None

    def __post_init__(self):
        ch = self.chain
        self.A0, self.Ac, self.As, self.t = ch.A0, ch.Ac, ch.As, ch.t

    @property
    def q(self):
        return self.joint_basis.q

    @property
    def n(self):
        return self.chain.n

    @classmethod
    def from_scenario(cls, scenario, config: SolverConfig | None = None) -> "Problem":
        config = config or SolverConfig()
        jb = build_basis(scenario.q, scenario.m, scenario.T)
        bb = jb if scenario.m_base == scenario.m else build_basis(scenario.q, scenario.m_base, scenario.T)
        G, h = build_boundary_matrices(jb, scenario.joint_boundary)
        Gb, hb = build_boundary_matrices(bb, scenario.base_boundary)
        limits = [None if lim is None else build_limit_matrices(jb, *lim) for lim in scenario.joint_limits]
        return cls(
            chain=scenario.chain,
            joint_basis=jb,
            base_basis=bb,
            x_d=np.asarray(scenario.desired_path, dtype=float),
            holonomic=scenario.holonomic,
            w1=config.w1 if config.w1 is not None else scenario.w1,
            w2=config.w2 if config.w2 is not None else scenario.w2,
            G_theta=G,
            h_theta=h,
            limits=limits,
            G_xb=planar_block(Gb),
            h_xb=np.concatenate([hb, hb]),
            obstacles=list(scenario.obstacles),
            clearance=scenario.base_radius + scenario.collision_margin,
        )


@dataclass
class SolverState:
    c_theta: np.ndarray          # (n, m)
    theta: np.ndarray            # (q, n)
    v_theta: np.ndarray          # (q, n)
    w_theta: np.ndarray          # (q, n)
    linkpoints: np.ndarray       # (q, n + 1, 3)
    c_xb: np.ndarray             # (2 m_base,)
    phi: np.ndarray              # (q,)
    v_phi: np.ndarray
    w_phi: np.ndarray
    s_theta: np.ndarray          # (n, 2q); zero rows for unlimited joints
    s_coll: np.ndarray           # (n_obs, q)
    coll_rows: np.ndarray        # (n_obs, q, 2 m_base)
    coll_rhs: np.ndarray         # (n_obs, q)
    lam: dict
    rho: dict

    def copy(self) -> "SolverState":
        out = {}
        for name, val in vars(self).items():
            if isinstance(val, np.ndarray):
                out[name] = val.copy()
            elif isinstance(val, dict):
                out[name] = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in val.items()}
            else:
                out[name] = val
        return SolverState(**out)

    def base_xy(self, basis):
        m = basis.m
        return np.column_stack([basis.P0 @ self.c_xb[:m], basis.P0 @ self.c_xb[m:]])


def wrap_angle(a):
    """Map angles to ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


def surrogate_project(v, w, lam=0.0, rho=1.0, previous=None):
    """Minimizer of ``rho (r - atan2(w, v))^2 + lam r``.

    The squared distance to ``atan2`` shares its minimizer with the nonconvex
    ``(cos r - v)^2 + (sin r - w)^2``. Where ``(v, w) = (0, 0)`` the angle is
    undefined; `previous` is returned there (zero if not given). Works
    elementwise; returns ``(r, degenerate_mask)``.
    """
    if not np.all(np.asarray(rho) > 0):
        raise ValueError("rho must be positive")
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    r = np.arctan2(w, v) - np.asarray(lam, dtype=float) / (2.0 * np.asarray(rho, dtype=float))
    degenerate = (v == 0.0) & (w == 0.0)
    if np.any(degenerate):
        prev = np.zeros_like(r) if previous is None else np.broadcast_to(previous, r.shape)
        r = np.where(degenerate, prev, r)
    return r, degenerate


# ----------------------------------------------------------------- steps


def _joint_qp(problem, state, i):
    jb = problem.joint_basis
    lam, rho = state.lam, state.rho
    qf = QuadraticForm.zero(jb.m)
    qf.H += 2.0 * problem.w1 * (jb.P2.T @ jb.P2)
    # residual theta - P0 c  ==  -(P0 c - theta)
    accumulate_penalty(qf, jb.P0, state.theta[:, i], -lam["p"][:, i], rho["p"])
    if problem.G_theta.shape[0]:
        accumulate_penalty(qf, problem.G_theta, problem.h_theta, lam["G"][i], rho["G"])
    if problem.limits[i] is not None:
        A, b = problem.limits[i]
        accumulate_penalty(qf, A, b - state.s_theta[i], lam["A"][i], rho["A"])
    return qf


def step_joint_coeffs(state, problem, config=None):
    """Joint coefficient update, one independent QP per joint."""
    reg = None if config is None else config.regularization
    return np.stack([solve_convex_qp(_joint_qp(problem, state, i), reg) for i in range(problem.n)])


def step_linkpoints(state, problem, backend=None, parallel=False):
    """Link points with all trig copies frozen; one QP per timestep.

    With `parallel` the numba backend spreads the timesteps over threads.
    """
    K = backend or kernels.get_backend()
    lam, rho = state.lam, state.rho
    ch = problem.chain
    return K.solve_linkpoints(
        problem.A0, problem.Ac, problem.As, problem.t, ch.tool_offset, ch.mount_rotation,
        ch.mount_offset, state.v_theta, state.w_theta, state.v_phi, state.w_phi,
        state.base_xy(problem.base_basis), problem.x_d, lam["f1"], lam["f2"], rho["f1"], rho["f2"],
        parallel)


def step_trig_theta(state, problem, backend=None):
    """Joint cosine/sine copies against the FK residual and ``cos/sin(theta^k)``."""
    K = backend or kernels.get_backend()
    lam, rho = state.lam, state.rho
    return K.solve_trig_theta(
        problem.A0, problem.Ac, problem.As, problem.t, state.linkpoints,
        np.cos(state.theta), np.sin(state.theta), lam["f2"], lam["v"], lam["w"],
        rho["f2"], rho["vw"])


def step_theta(state, problem):
    """Closed-form joint angles balancing the basis fit and the atan2 projection.

    The atan2 branch nearest to the basis trajectory is used, so joints whose
    range straddles +-pi stay continuous.
    """
    lam, rho = state.lam, state.rho
    pc = problem.joint_basis.P0 @ state.c_theta.T
    target, degenerate = surrogate_project(state.v_theta, state.w_theta, previous=state.theta)
    target = pc + wrap_angle(target - pc)
    rc, rv = rho["p"], rho["vw"]
    return (2.0 * rc * pc + 2.0 * rv * target - lam["p"] - lam["theta"]) / (2.0 * (rc + rv))


def refresh_collision_rows(state, problem):
    """Re-linearize every obstacle at the current base trajectory and re-fit slacks."""
    xy = state.base_xy(problem.base_basis)
    q, m2 = problem.q, 2 * problem.base_basis.m
    rows = np.zeros((len(problem.obstacles), q, m2))
    rhs = np.zeros((len(problem.obstacles), q))
    for k, obs in enumerate(problem.obstacles):
        rows[k], rhs[k] = collision_rows(obs, xy, problem.base_basis.P0, problem.clearance)
    state.coll_rows, state.coll_rhs = rows, rhs
    if len(problem.obstacles):
        r = np.einsum("kta,a->kt", rows, state.c_xb) - rhs
        state.s_coll = update_slack(r, state.lam["coll"], state.rho["coll"])


def _heading_terms(state, problem):
    """Arm tip in the base frame ``y`` and its heading-rotated xy part."""
    y = mount_point(problem.chain, state.linkpoints[:, 0, :])
    G, d = build_f1_blocks(state.linkpoints[:, 0, :], problem.chain)
    rot = np.einsum("tab,tb->ta", G, np.stack([state.v_phi, state.w_phi], -1)) + d
    return y, rot


def base_qp(state, problem):
    bb = problem.base_basis
    lam, rho = state.lam, state.rho
    m, q = bb.m, problem.q
    qf = QuadraticForm.zero(2 * m)
    P1 = planar_block(bb.P1)
    qf.H += 2.0 * problem.w2 * (P1.T @ P1)
    _, rot = _heading_terms(state, problem)
    P0 = planar_block(bb.P0)  # rows: x at all t, then y at all t
    target = np.concatenate([problem.x_d[:, 0] - rot[:, 0], problem.x_d[:, 1] - rot[:, 1]])
    mult = np.concatenate([lam["f1"][:, 0], lam["f1"][:, 1]])
    accumulate_penalty(qf, P0, target, mult, rho["f1"])
    if not problem.holonomic:
        A3 = np.hstack([state.w_phi[:, None] * bb.P1, -state.v_phi[:, None] * bb.P1])
        accumulate_penalty(qf, A3, np.zeros(q), lam["f3"], rho["f3"])
    if problem.G_xb.shape[0]:
        accumulate_penalty(qf, problem.G_xb, problem.h_xb, lam["Gx"], rho["Gx"])
    for k in range(len(problem.obstacles)):
        accumulate_penalty(qf, state.coll_rows[k], state.coll_rhs[k] - state.s_coll[k],
                           lam["coll"][k], rho["coll"])
    return qf


def step_base_coeffs(state, problem, config=None):
    """Base coefficient update: one QP in ``2 m`` unknowns."""
    reg = None if config is None else config.regularization
    return solve_convex_qp(base_qp(state, problem), reg)


def step_trig_phi(state, problem, backend=None):
    """Heading cosine/sine copies; one 2x2 QP per timestep."""
    K = backend or kernels.get_backend()
    lam, rho = state.lam, state.rho
    y = mount_point(problem.chain, state.linkpoints[:, 0, :])
    xdot, ydot = base_velocity(state.c_xb, problem.base_basis)
    return K.solve_trig_phi(
        y, state.base_xy(problem.base_basis), problem.x_d, xdot, ydot,
        np.cos(state.phi), np.sin(state.phi), lam["f1"], lam["f3"], lam["v_phi"], lam["w_phi"],
        rho["f1"], rho["f3"], rho["vw_phi"], not problem.holonomic)


def step_phi(state):
    """Heading from its cosine/sine copies, wrapped to ``(-pi, pi]``."""
    phi, degenerate = surrogate_project(state.v_phi, state.w_phi, state.lam["phi"],
                                        state.rho["vw_phi"], previous=state.phi)
    if np.any(degenerate):
        logger.warning("heading copies vanished at %d timesteps; kept previous heading",
                       int(degenerate.sum()))
    return wrap_angle(phi)


def update_joint_slacks(state, problem):
    s = np.zeros_like(state.s_theta)
    for i, lim in enumerate(problem.limits):
        if lim is not None:
            A, b = lim
            s[i] = update_slack(A @ state.c_theta[i] - b, state.lam["A"][i], state.rho["A"])
    return s


# ------------------------------------------------------------- residuals


def compute_residuals(state, problem):
    """All penalized residuals at the current iterate, keyed like the multipliers."""
    jb = problem.joint_basis
    r = {}
    r["f1"] = eval_f1(state, problem)
    r["f2"] = eval_f2(state, problem)
    r["f3"] = np.zeros(problem.q) if problem.holonomic else eval_f3(state, problem)
    r["p"] = state.theta - jb.P0 @ state.c_theta.T
    r["G"] = state.c_theta @ problem.G_theta.T - problem.h_theta
    A_res = np.zeros_like(state.s_theta)
    for i, lim in enumerate(problem.limits):
        if lim is not None:
            A, b = lim
            A_res[i] = A @ state.c_theta[i] + state.s_theta[i] - b
    r["A"] = A_res
    r["Gx"] = problem.G_xb @ state.c_xb - problem.h_xb
    if len(problem.obstacles):
        r["coll"] = np.einsum("kta,a->kt", state.coll_rows, state.c_xb) + state.s_coll - state.coll_rhs
    else:
        r["coll"] = np.zeros((0, problem.q))
    r["v"] = state.v_theta - np.cos(state.theta)
    r["w"] = state.w_theta - np.sin(state.theta)
    r["theta"] = wrap_angle(state.theta - np.arctan2(state.w_theta, state.v_theta))
    r["v_phi"] = state.v_phi - np.cos(state.phi)
    r["w_phi"] = state.w_phi - np.sin(state.phi)
    r["phi"] = wrap_angle(state.phi - np.arctan2(state.w_phi, state.v_phi))
    return r


def residual_summary(res) -> dict:
    """Max-abs residual per reported group."""
    def mx(*keys):
        vals = [np.abs(res[k]).max(initial=0.0) for k in keys]
        return float(max(vals))
    return {
        "f1": mx("f1"),
        "f2": mx("f2"),
        "f3": mx("f3"),
        "p_consensus": mx("p"),
        "trig_theta": mx("v", "w"),
        "theta_projection": mx("theta"),
        "trig_phi": mx("v_phi", "w_phi"),
        "phi_projection": mx("phi"),
        "joint_boundary": mx("G"),
        "joint_limits": mx("A"),
        "base_boundary": mx("Gx"),
        "collision": mx("coll"),
    }


CONVERGENCE_KEYS = ("f1", "f2", "f3", "p_consensus", "trig_theta", "theta_projection",
                    "trig_phi", "phi_projection")

_FAMILY_KEYS = {"vw": ("v", "w", "theta"), "vw_phi": ("v_phi", "w_phi", "phi")}
_DUAL_FAMILY = {"f1": "f1", "f2": "f2", "f3": "f3", "p": "p", "G": "G", "A": "A", "Gx": "Gx",
                "coll": "coll", "v": "vw", "w": "vw", "theta": "vw", "v_phi": "vw_phi",
                "w_phi": "vw_phi", "phi": "vw_phi"}


def family_residuals(res) -> dict:
    out = {}
    for fam in FAMILIES:
        keys = _FAMILY_KEYS.get(fam, (fam,))
        out[fam] = float(max(np.abs(res[k]).max(initial=0.0) for k in keys))
    return out


def update_duals(state, res, config, previous=None, holonomic=False):
    """Multiplier ascent ``lam += 2 rho r`` and the stall-driven penalty schedule.

    `previous` is the family-residual dict of the last iteration; a family
    whose residual did not shrink by `config.rho_stall` has its penalty scaled
    by `config.rho_scale` (capped at `config.rho_max`) unless it already sits
    below a tenth of the convergence tolerance.
    """
    for key, fam in _DUAL_FAMILY.items():
        if fam == "f3" and holonomic:
            continue
        state.lam[key] = state.lam[key] + 2.0 * state.rho[fam] * res[key]
    current = family_residuals(res)
    if previous is not None:
        floor = 0.1 * config.residual_tol
        for fam in FAMILIES:
            if current[fam] > floor and current[fam] > config.rho_stall * previous[fam]:
                state.rho[fam] = min(state.rho[fam] * config.rho_scale, config.rho_max)
    return current


# ----------------------------------------------------------------- driver


def path_heading(path):
    """Heading of the path tangent at every sample (closed paths use wrap-around differences)."""
    xy = np.asarray(path)[:, :2]
    if np.linalg.norm(xy[0] - xy[-1]) < 1e-9 and len(xy) > 2:
        ext = np.vstack([xy[-2], xy, xy[1]])
        vel = ext[2:] - ext[:-2]
    else:
        vel = np.gradient(xy, axis=0)
    return np.arctan2(vel[:, 1], vel[:, 0])


def initial_state(problem, scenario, config=None) -> SolverState:
    """Constant arm pose, base fitted to the path through that pose."""
    config = config or SolverConfig()
    q, n = problem.q, problem.n
    jb, bb = problem.joint_basis, problem.base_basis
    if config.theta_init is not None:
        theta0 = np.asarray(config.theta_init, dtype=float)
    elif scenario.theta_init is not None:
        theta0 = np.asarray(scenario.theta_init, dtype=float)
    else:
        theta0 = np.array([0.0 if lim is None else 0.5 * (lim[0] + lim[1]) for lim in scenario.joint_limits])
    theta = np.tile(theta0, (q, 1))
    X = kernels.get_backend(config.backend).forward_kinematics(problem.A0, problem.Ac, problem.As, problem.t,
                                   problem.chain.tool_offset, theta)
    phi_mode = scenario.phi_init
    if phi_mode is None:
        phi_mode = 0.0 if problem.holonomic else "tangent"
    if phi_mode == "tangent":
        phi = path_heading(problem.x_d)
    else:
        phi = np.full(q, float(phi_mode))
    y = mount_point(problem.chain, X[:, 0, :])
    Rh = heading_rotation(np.cos(phi), np.sin(phi))
    base_xy = problem.x_d[:, :2] - np.einsum("tab,tb->ta", Rh, y)[:, :2]
    c_b = bb.fit(base_xy)
    n_obs = len(problem.obstacles)
    lam = {
        "f1": np.zeros((q, 3)), "f2": np.zeros((q, 3 * n)), "f3": np.zeros(q),
        "p": np.zeros((q, n)), "G": np.zeros((n, problem.G_theta.shape[0])),
        "A": np.zeros((n, 2 * q)), "Gx": np.zeros(problem.G_xb.shape[0]),
        "coll": np.zeros((n_obs, q)), "v": np.zeros((q, n)), "w": np.zeros((q, n)),
        "theta": np.zeros((q, n)), "v_phi": np.zeros(q), "w_phi": np.zeros(q), "phi": np.zeros(q),
    }
    state = SolverState(
        c_theta=np.outer(theta0, np.ones(jb.m)),
        theta=theta,
        v_theta=np.cos(theta),
        w_theta=np.sin(theta),
        linkpoints=X,
        c_xb=np.concatenate([c_b[:, 0], c_b[:, 1]]),
        phi=phi,
        v_phi=np.cos(phi),
        w_phi=np.sin(phi),
        s_theta=np.zeros((n, 2 * q)),
        s_coll=np.zeros((n_obs, q)),
        coll_rows=np.zeros((n_obs, q, 2 * bb.m)),
        coll_rhs=np.zeros((n_obs, q)),
        lam=lam,
        rho=dict(config.rho_init),
    )
    state.s_theta = update_joint_slacks(state, problem)
    refresh_collision_rows(state, problem)
    return state


@dataclass
class SolveResult:
    state: SolverState
    problem: Problem
    converged: bool
    iterations: int
    history: list
    wall_time: float
    step_times: dict
    collision_audit: dict


def _check_finite(state, iteration):
    for name, val in vars(state).items():
        if isinstance(val, np.ndarray) and not np.all(np.isfinite(val)):
            raise SolverAbort(f"non-finite {name} at iteration {iteration}", state, iteration)
    for key, val in state.lam.items():
        if not np.all(np.isfinite(val)):
            raise SolverAbort(f"non-finite multiplier {key} at iteration {iteration}", state, iteration)


def audit_collision_rows(state, problem) -> tuple[int, int]:
    """Count timesteps whose affine row holds, and those among them that still collide."""
    if not problem.obstacles:
        return 0, 0
    xy = state.base_xy(problem.base_basis)
    held = violated = 0
    for k, obs in enumerate(problem.obstacles):
        affine = state.coll_rows[k] @ state.c_xb - state.coll_rhs[k]
        ok = affine <= 0.0
        held += int(ok.sum())
        violated += int(np.sum(ok & (obs.value(xy, problem.clearance) > 1e-12)))
    return held, violated


def solve(scenario, config: SolverConfig | None = None, state: SolverState | None = None,
          callback=None) -> SolveResult:
    """Run the ADMM loop until every constraint and consensus residual is below tolerance."""
    config = config or SolverConfig()
    problem = Problem.from_scenario(scenario, config)
    if state is None:
        state = initial_state(problem, scenario, config)
    else:
        _check_finite(state, 0)
    backend = kernels.get_backend(config.backend)
    history = []
    previous = None
    converged = False
    audit = {"rows_satisfied": 0, "violations": 0}
    step_times = {k: 0.0 for k in ("joint", "arm", "base", "duals")}
    start = time.perf_counter()
    it = 0
    for it in range(1, config.max_iter + 1):
        try:
            (t0, t1, t2, t3), res = _iterate(state, problem, config, backend, audit)
        except ValueError as exc:
            # non-finite input to a factorization
            if all(np.all(np.isfinite(v)) for v in vars(state).values() if isinstance(v, np.ndarray)):
                raise
            raise SolverAbort(f"non-finite iterate at iteration {it}: {exc}", state, it) from None
        summary = residual_summary(res)
        summary["iteration"] = it
        history.append(summary)
        previous = update_duals(state, res, config, previous, problem.holonomic)
        _check_finite(state, it)
        norm2 = state.v_theta**2 + state.w_theta**2
        if norm2.min() < 0.5 or norm2.max() > 1.5:
            logger.debug("iteration %d: joint trig copies left the unit annulus [%.3f, %.3f]",
                         it, norm2.min(), norm2.max())
        t4 = time.perf_counter()
        step_times["joint"] += t1 - t0
        step_times["arm"] += t2 - t1
        step_times["base"] += t3 - t2
        step_times["duals"] += t4 - t3
        if callback is not None:
            callback(it, state, summary)
        if max(summary[k] for k in CONVERGENCE_KEYS) <= config.residual_tol:
            converged = True
            break
    wall = time.perf_counter() - start
    return SolveResult(state, problem, converged, it, history, wall, step_times, audit)


def _iterate(state, problem, config, backend, audit):
    """One sweep of block updates; returns the step timestamps and the residuals."""
    t0 = time.perf_counter()
    state.c_theta = step_joint_coeffs(state, problem, config)
    t1 = time.perf_counter()
    state.linkpoints = step_linkpoints(state, problem, backend, config.parallel)
    state.v_theta, state.w_theta = step_trig_theta(state, problem, backend)
    state.theta = step_theta(state, problem)
    t2 = time.perf_counter()
    refresh_collision_rows(state, problem)
    state.c_xb = step_base_coeffs(state, problem, config)
    if config.audit_collisions:
        held, bad = audit_collision_rows(state, problem)
        audit["rows_satisfied"] += held
        audit["violations"] += bad
    state.v_phi, state.w_phi = step_trig_phi(state, problem, backend)
    state.phi = step_phi(state)
    t3 = time.perf_counter()
    state.s_theta = update_joint_slacks(state, problem)
    if problem.obstacles:
        r = np.einsum("kta,a->kt", state.coll_rows, state.c_xb) - state.coll_rhs
        state.s_coll = update_slack(r, state.lam["coll"], state.rho["coll"])
    return (t0, t1, t2, t3), compute_residuals(state, problem)
