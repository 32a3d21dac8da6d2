"""Benchmark runs, result artifacts, cyclicity tables and the initialization-robustness sweep."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .admm import Problem, SolverAbort, SolverConfig, solve
from .kinematics import world_end_effector
from .scenario import Scenario, generate_path, path_arc_length

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

# Endpoint tolerances used to flag a trajectory as closed.
CYCLIC_TOL = {"theta": 5e-2, "x_b": 5e-2, "phi": 2e-1}

DEFAULT_DELTAS = (0.0, 0.2, 0.5, 1.0)


def trajectory_columns(n: int) -> list[str]:
    """Fixed column order of ``trajectories.csv``."""
    return (["t"]
            + [f"theta_{i}" for i in range(1, n + 1)]
            + [f"dtheta_{i}" for i in range(1, n + 1)]
            + [f"ddtheta_{i}" for i in range(1, n + 1)]
            + ["x_b", "y_b", "phi_b", "ee_x", "ee_y", "ee_z", "ee_err"])


@dataclass
class Trajectories:
    t: np.ndarray
    theta: np.ndarray       # (q, n), basis trajectory
    dtheta: np.ndarray
    ddtheta: np.ndarray
    xb: np.ndarray          # (q, 2)
    dxb: np.ndarray
    ddxb: np.ndarray
    phi: np.ndarray         # (q,), unwrapped
    dphi: np.ndarray
    ddphi: np.ndarray
    ee: np.ndarray          # (q, 3)
    ee_err: np.ndarray      # (q,)

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.theta, self.dtheta, self.ddtheta, self.xb,
                                self.phi, self.ee, self.ee_err])


def extract_trajectories(state, problem, chain, x_d) -> Trajectories:
    """Smooth trajectories from the solver iterate.

    Joint angles and base position come from their basis coefficients. The
    heading is emitted per sample (unwrapped) with second-order finite-difference
    derivatives, since it has no basis coefficients of its own.
    The end-effector is recomputed from these emitted values only.
    """
    jb, bb = problem.joint_basis, problem.base_basis
    m = bb.m
    theta = jb.P0 @ state.c_theta.T
    cx, cy = state.c_xb[:m], state.c_xb[m:]
    xb = np.column_stack([bb.P0 @ cx, bb.P0 @ cy])
    phi = np.unwrap(state.phi)
    t = jb.times
    dphi = np.gradient(phi, t, edge_order=2)
    ddphi = np.gradient(dphi, t, edge_order=2)
    ee = world_end_effector(chain, theta, xb, phi)
    return Trajectories(
        t=t, theta=theta, dtheta=jb.P1 @ state.c_theta.T, ddtheta=jb.P2 @ state.c_theta.T,
        xb=xb, dxb=np.column_stack([bb.P1 @ cx, bb.P1 @ cy]),
        ddxb=np.column_stack([bb.P2 @ cx, bb.P2 @ cy]),
        phi=phi, dphi=dphi, ddphi=ddphi, ee=ee,
        ee_err=np.linalg.norm(ee - x_d, axis=1))


def write_trajectories_csv(path, traj: Trajectories) -> None:
    path = Path(path)
    cols = trajectory_columns(traj.theta.shape[1])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in traj.table():
            writer.writerow([FLOAT_FORMAT % v for v in row])


def read_trajectories_csv(path) -> dict:
    """Columns of a ``trajectories.csv`` as float arrays keyed by header name."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, j] for j, name in enumerate(header)}


def _endpoints(arr) -> dict:
    arr = np.atleast_2d(np.asarray(arr, dtype=float).T).T
    return {"initial": arr[0].tolist(), "final": arr[-1].tolist()}


def trajectory_endpoints(traj: Trajectories) -> dict:
    """Initial and final values per channel and derivative order."""
    return {
        "theta": {"0": _endpoints(traj.theta), "1": _endpoints(traj.dtheta), "2": _endpoints(traj.ddtheta)},
        "x_b": {"0": _endpoints(traj.xb), "1": _endpoints(traj.dxb), "2": _endpoints(traj.ddxb)},
        "phi": {"0": _endpoints(traj.phi), "1": _endpoints(traj.dphi), "2": _endpoints(traj.ddphi)},
    }


def cyclicity_report(endpoints: dict) -> dict:
    """Per-channel ``|initial - final|`` and their averages per (channel, order) group.

    Heading configuration differences are taken modulo ``2 pi``. ``closed`` is
    true when every group is within `CYCLIC_TOL`.
    """
    residuals, groups = {}, {}
    closed = True
    for chan in ("theta", "x_b", "phi"):
        for order in ("0", "1", "2"):
            e = endpoints[chan][order]
            diff = np.asarray(e["initial"], dtype=float) - np.asarray(e["final"], dtype=float)
            if chan == "phi" and order == "0":
                diff = np.pi - np.mod(np.pi - diff, 2.0 * np.pi)
            diff = np.abs(diff)
            residuals[f"{chan}/{order}"] = diff.tolist()
            groups[f"{chan}/{order}"] = float(diff.mean())
            closed &= bool(groups[f"{chan}/{order}"] <= CYCLIC_TOL[chan])
    return {"residuals": residuals, "groups": groups, "closed": closed}


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    return x


def _dump_json(path, data) -> None:
    Path(path).write_text(json.dumps(_finite_or_none(data), indent=2, sort_keys=True) + "\n")


@dataclass
class SolveReport:
    scenario: str
    converged: bool
    aborted: bool
    iterations: int
    history: list
    trajectories: Trajectories
    metrics: dict
    cyclicity: dict | None
    collision_audit: dict
    wall_time: float
    error: str | None = None

    def summary(self) -> dict:
        """Deterministic summary (no timing) written to ``report.json``."""
        return {
            "scenario": self.scenario,
            "converged": self.converged,
            "aborted": self.aborted,
            "error": self.error,
            "iterations": self.iterations,
            "final_residuals": self.history[-1] if self.history else None,
            "metrics": self.metrics,
            "cyclicity": self.cyclicity,
            "endpoints": trajectory_endpoints(self.trajectories),
            "collision_audit": self.collision_audit,
        }


def trajectory_metrics(traj: Trajectories, x_d) -> dict:
    arc = path_arc_length(x_d)
    return {
        "ee_err_max": float(traj.ee_err.max()),
        "ee_err_mean": float(traj.ee_err.mean()),
        "ee_err_max_pct_arc": float(100.0 * traj.ee_err.max() / arc),
        "path_arc_length": arc,
        "base_arc_length": path_arc_length(traj.xb),
        "mean_abs_ddtheta": float(np.abs(traj.ddtheta).mean()),
        "mean_abs_dtheta": float(np.abs(traj.dtheta).mean()),
    }


def run(scenario: Scenario, config: SolverConfig | None = None, out_dir=None) -> SolveReport:
    """Solve and, when `out_dir` is given, write ``trajectories.csv``,
    ``residuals.json``, ``report.json`` and ``timing.json`` there.

    A solver abort still writes artifacts (flagged ``aborted``) before re-raising.
    """
    config = config or SolverConfig()
    abort = None
    try:
        res = solve(scenario, config)
        state, problem, history = res.state, res.problem, res.history
        converged, iterations, wall, audit = res.converged, res.iterations, res.wall_time, res.collision_audit
        step_times = res.step_times
    except SolverAbort as exc:
        abort = exc
        problem = Problem.from_scenario(scenario, config)
        state, history = exc.state, []
        converged, iterations, wall, step_times = False, exc.iteration or 0, float("nan"), {}
        audit = {"rows_satisfied": 0, "violations": 0}
    with np.errstate(invalid="ignore"):
        traj = extract_trajectories(state, problem, scenario.chain, problem.x_d)
        metrics = trajectory_metrics(traj, problem.x_d)
        cyc = cyclicity_report(trajectory_endpoints(traj)) if scenario.cyclic else None
    report = SolveReport(
        scenario=scenario.name, converged=converged, aborted=abort is not None,
        iterations=iterations, history=history, trajectories=traj, metrics=metrics,
        cyclicity=cyc, collision_audit=audit, wall_time=wall,
        error=None if abort is None else str(abort))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectories_csv(out / "trajectories.csv", traj)
        _dump_json(out / "residuals.json", {"history": history})
        _dump_json(out / "report.json", report.summary())
        _dump_json(out / "timing.json", {"wall_time": wall, "step_times": step_times})
    if abort is not None:
        raise abort
    return report


def cyclicity_from_report(path) -> dict:
    """Cyclicity table for a ``report.json`` written by `run`."""
    data = json.loads(Path(path).read_text())
    if "endpoints" not in data:
        raise ValueError(f"{path}: no trajectory endpoints recorded")
    return cyclicity_report(data["endpoints"])


# ----------------------------------------------------------- robustness


def default_random_path_params(scenario: Scenario) -> dict:
    """Random-path family centred on the scenario path with its mean planar radius."""
    x_d = np.asarray(scenario.desired_path)
    if np.linalg.norm(x_d[0] - x_d[-1]) <= 1e-9:
        x_d = x_d[:-1]
    center = x_d.mean(axis=0)
    radius = float(np.mean(np.linalg.norm(x_d[:, :2] - center[:2], axis=1)))
    return {"center": center.tolist(), "radius": radius, "amplitude": 0.2 * radius,
            "z_amplitude": 0.05, "harmonics": 3}


def perturb_init(theta0, delta: float, rng, limits) -> np.ndarray:
    """``theta0 + U[-delta, delta]``, clipped strictly inside the joint limits."""
    theta = np.asarray(theta0, dtype=float) + rng.uniform(-delta, delta, len(theta0))
    for i, lim in enumerate(limits):
        if lim is not None:
            pad = 1e-3 * (lim[1] - lim[0])
            theta[i] = np.clip(theta[i], lim[0] + pad, lim[1] - pad)
    return theta


def _instance_scenario(scenario: Scenario, seed: int, params: dict) -> Scenario:
    path = generate_path("random-fourier", scenario.q, seed=seed, **params)
    return dataclasses.replace(scenario, desired_path=path, name=f"{scenario.name}-{seed}").validate()


def _instance_error(args) -> dict:
    scenario, config, theta_init = args
    cfg = dataclasses.replace(config, theta_init=theta_init, rho_init=dict(config.rho_init))
    try:
        res = solve(scenario, cfg)
    except SolverAbort as exc:
        logger.warning("instance %s aborted: %s", scenario.name, exc)
        return {"error_pct": float("inf"), "converged": False, "iterations": exc.iteration}
    traj = extract_trajectories(res.state, res.problem, scenario.chain, res.problem.x_d)
    pct = 100.0 * traj.ee_err.max() / path_arc_length(res.problem.x_d)
    return {"error_pct": float(pct), "converged": res.converged, "iterations": res.iterations}


def robustness_study(scenario: Scenario, config: SolverConfig | None = None,
                     deltas=DEFAULT_DELTAS, instances: int = 5, seed: int = 0,
                     path_params: dict | None = None, workers: int = 1) -> dict:
    """AvgMax tracking error versus initial-guess perturbation size.

    Each instance is a seeded random closed path. For every ``delta`` the
    scenario's initial joint angles are perturbed by ``U[-delta, delta]`` per
    joint; the per-instance error is the max-over-time end-effector error in
    percent of path arc length. Runs that hit the iteration limit count at
    their achieved error.
    """
    if instances < 2:
        raise ValueError("instances must be at least 2")
    config = config or SolverConfig()
    params = dict(default_random_path_params(scenario), **(path_params or {}))
    theta0 = scenario.theta_init
    if theta0 is None:
        theta0 = np.array([0.0 if lim is None else 0.5 * (lim[0] + lim[1]) for lim in scenario.joint_limits])
    scenes = [_instance_scenario(scenario, seed * 100003 + k, params) for k in range(instances)]
    jobs, keys = [], []
    for k, sc in enumerate(scenes):
        jobs.append((sc, config, np.asarray(theta0, dtype=float)))
        keys.append(("baseline", k))
        for j, delta in enumerate(deltas):
            if delta == 0.0:
                continue
            rng = np.random.default_rng([seed, k, j])
            jobs.append((sc, config, perturb_init(theta0, float(delta), rng, scenario.joint_limits)))
            keys.append((j, k))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_instance_error, jobs))
    else:
        outcomes = [_instance_error(job) for job in jobs]
    by_key = dict(zip(keys, outcomes))

    def row(label, delta, results):
        errs = np.array([r["error_pct"] for r in results])
        return {"label": label, "delta": delta, "avgmax_pct": float(errs.mean()),
                "std_pct": float(errs.std()), "worst_pct": float(errs.max()),
                "converged": int(sum(r["converged"] for r in results)),
                "instances": [r["error_pct"] for r in results]}

    baseline = [by_key[("baseline", k)] for k in range(instances)]
    rows = [row("baseline", 0.0, baseline)]
    for j, delta in enumerate(deltas):
        results = baseline if delta == 0.0 else [by_key[(j, k)] for k in range(instances)]
        rows.append(row("perturbed", float(delta), results))
    return {"scenario": scenario.name, "seed": seed, "instances": instances,
            "path_params": params, "theta_init": np.asarray(theta0, dtype=float).tolist(),
            "rows": rows,
            "worst_pct": max(r["worst_pct"] for r in rows)}
