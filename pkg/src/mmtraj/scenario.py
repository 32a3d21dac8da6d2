"""Scenario files and desired-path generators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .constraints import Obstacle
from .kinematics import KinematicChain, load_chain
from .trajectory import BoundarySpec

HOLONOMIC = "holonomic"
NON_HOLONOMIC = "non-holonomic"

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_VEC2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_BOUNDARY = {
    "oneOf": [
        {"enum": ["cyclic", "none"]},
        {
            "type": "object",
            "properties": {
                "initial": {"type": "object"},
                "final": {"type": "object"},
                "cyclic": {"type": "array", "items": {"enum": [0, 1, 2]}},
            },
            "additionalProperties": False,
        },
    ]
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["chain", "base_type", "desired_path"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "chain": {
            "type": "object",
            "required": ["joints"],
            "properties": {
                "joints": {"type": "array", "minItems": 1, "items": {"type": "object"}},
                "tool_offset": _VEC3,
                "mount": {
                    "type": "object",
                    "properties": {
                        "R": {"type": "array", "items": _VEC3, "minItems": 3, "maxItems": 3},
                        "t": _VEC3,
                    },
                    "additionalProperties": False,
                },
            },
        },
        "base_type": {"enum": [HOLONOMIC, NON_HOLONOMIC]},
        "base_radius": {"type": "number", "minimum": 0},
        "collision_margin": {"type": "number", "minimum": 0},
        "desired_path": {
            "type": "object",
            "oneOf": [
                {"required": ["points"]},
                {"required": ["kind"]},
            ],
        },
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["center", "semi_axes"],
                "properties": {"center": _VEC2, "semi_axes": _VEC2},
            },
        },
        "limits": {
            "type": "array",
            "items": {"oneOf": [{"type": "null"}, _VEC2]},
        },
        "boundary": {
            "type": "object",
            "properties": {"joints": _BOUNDARY, "base": _BOUNDARY},
            "additionalProperties": False,
        },
        "weights": {
            "type": "object",
            "properties": {"w1": {"type": "number", "exclusiveMinimum": 0},
                           "w2": {"type": "number", "exclusiveMinimum": 0}},
        },
        "discretization": {
            "type": "object",
            "properties": {
                "q": {"type": "integer", "minimum": 4},
                "m": {"type": "integer", "minimum": 4},
                "m_base": {"type": "integer", "minimum": 4},
                "T": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "theta_init": {"type": "array", "items": {"type": "number"}},
        "phi_init": {"oneOf": [{"type": "number"}, {"enum": ["tangent"]}]},
        "description": {"type": "string"},
    },
}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    chain: KinematicChain
    base_type: str
    desired_path: np.ndarray
    obstacles: list = field(default_factory=list)
    joint_limits: list = field(default_factory=list)
    joint_boundary: BoundarySpec = field(default_factory=BoundarySpec.periodic)
    base_boundary: BoundarySpec = field(default_factory=BoundarySpec.periodic)
    w1: float = 100.0
    w2: float = 1.0
    T: float = 10.0
    q: int = 100
    m: int = 12
    m_base: int = 12
    base_radius: float = 0.0
    collision_margin: float = 0.0
    theta_init: np.ndarray | None = None
    phi_init: float | str | None = None
    name: str = "scenario"

    @property
    def holonomic(self) -> bool:
        return self.base_type == HOLONOMIC

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def cyclic(self) -> bool:
        return bool(self.joint_boundary.cyclic) or bool(self.base_boundary.cyclic)

    def validate(self):
        if self.base_type not in (HOLONOMIC, NON_HOLONOMIC):
            raise ScenarioError(f"base_type: unknown value {self.base_type!r}")
        if self.desired_path.shape != (self.q, 3):
            raise ScenarioError(f"desired_path: expected shape ({self.q}, 3), got {self.desired_path.shape}")
        if not np.all(np.isfinite(self.desired_path)):
            raise ScenarioError("desired_path: non-finite entries")
        if self.cyclic and np.linalg.norm(self.desired_path[0] - self.desired_path[-1]) > 1e-9:
            raise ScenarioError("desired_path: path is not closed but cyclic boundary conditions were requested")
        if len(self.joint_limits) != self.n:
            raise ScenarioError(f"limits: expected {self.n} entries, got {len(self.joint_limits)}")
        for i, lim in enumerate(self.joint_limits):
            if lim is not None and not lim[0] < lim[1]:
                raise ScenarioError(f"limits[{i}]: lower bound must be below upper bound")
        if self.theta_init is not None and np.shape(self.theta_init) != (self.n,):
            raise ScenarioError(f"theta_init: expected {self.n} values")
        if self.q < self.m or self.q < self.m_base:
            raise ScenarioError("discretization: q must be at least m")
        return self


def _boundary(raw) -> BoundarySpec:
    if raw is None or raw == "cyclic":
        return BoundarySpec.periodic()
    if raw == "none":
        return BoundarySpec()
    return BoundarySpec(**raw)


def resample_path(points, q: int) -> np.ndarray:
    """Resample a polyline to `q` points evenly spaced in arc length; endpoints are kept."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == q:
        return pts.copy()
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(pts[:1], q, axis=0)
    targets = np.linspace(0.0, s[-1], q)
    out = np.column_stack([np.interp(targets, s, pts[:, k]) for k in range(3)])
    out[0], out[-1] = pts[0], pts[-1]
    return out


def generate_path(kind: str, q: int = 100, **params) -> np.ndarray:
    """Closed, smooth desired path sampled at `q` uniform times over one period.

    Kinds and parameters:

    - ``circle``: ``center`` (3), ``radius``
    - ``ellipse``: ``center`` (3), ``semi_axes`` (2), ``phase``
    - ``lemniscate``: ``center`` (3), ``scale``
    - ``random-fourier``: ``center`` (3), ``radius``, ``amplitude``, ``harmonics``,
      ``z_amplitude``, ``seed``. A circle of `radius` plus seeded harmonics
      2..harmonics+1 whose amplitudes decay as ``amplitude / k``.
    """
    center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
    u = 2.0 * np.pi * np.linspace(0.0, 1.0, q)
    direction = float(params.get("direction", 1.0))
    u = direction * u + float(params.get("phase", 0.0))
    if kind == "circle":
        r = float(params.get("radius", 1.0))
        if r <= 0:
            raise ValueError("radius must be positive")
        xy = r * np.column_stack([np.cos(u), np.sin(u)])
        z = np.zeros(q)
    elif kind == "ellipse":
        a, b = params.get("semi_axes", (1.0, 0.5))
        if a <= 0 or b <= 0:
            raise ValueError("semi_axes must be positive")
        xy = np.column_stack([a * np.cos(u), b * np.sin(u)])
        z = np.zeros(q)
    elif kind == "lemniscate":
        a = float(params.get("scale", 1.0))
        if a <= 0:
            raise ValueError("scale must be positive")
        den = 1.0 + np.sin(u) ** 2
        xy = a * np.column_stack([np.cos(u) / den, np.sin(u) * np.cos(u) / den])
        z = np.zeros(q)
    elif kind == "random-fourier":
        rng = np.random.default_rng(params.get("seed", 0))
        r = float(params.get("radius", 1.0))
        amp = float(params.get("amplitude", 0.2))
        z_amp = float(params.get("z_amplitude", 0.05))
        harmonics = int(params.get("harmonics", 3))
        if r <= 0 or amp < 0 or harmonics < 1:
            raise ValueError("radius must be positive, amplitude non-negative, harmonics >= 1")
        xy = r * np.column_stack([np.cos(u), np.sin(u)])
        z = np.zeros(q)
        for k in range(2, harmonics + 2):
            a_k, b_k = rng.uniform(-1.0, 1.0, (2, 3)) * np.array([amp, amp, z_amp]) / k
            xy += np.outer(np.cos(k * u), a_k[:2]) + np.outer(np.sin(k * u), b_k[:2])
            z += a_k[2] * np.cos(k * u) + b_k[2] * np.sin(k * u)
    else:
        raise ValueError(f"unknown path kind {kind!r}")
    path = np.column_stack([xy, z]) + center
    path[-1] = path[0]
    return path


def path_arc_length(path) -> float:
    return float(np.sum(np.linalg.norm(np.diff(np.asarray(path), axis=0), axis=1)))


def scenario_from_dict(data: dict) -> Scenario:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None
    try:
        chain = load_chain(data["chain"])
    except ValueError as exc:
        raise ScenarioError(f"chain: {exc}") from None
    disc = data.get("discretization", {})
    q = int(disc.get("q", 100))
    m = int(disc.get("m", 12))
    path_spec = dict(data["desired_path"])
    if "points" in path_spec:
        pts = np.asarray(path_spec["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
            raise ScenarioError("desired_path/points: expected a list of at least two 3-vectors")
        path = resample_path(pts, q)
    else:
        kind = path_spec.pop("kind")
        try:
            path = generate_path(kind, q, **path_spec)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"desired_path: {exc}") from None
    limits = data.get("limits")
    if limits is None:
        limits = [None] * chain.n
    boundary = data.get("boundary", {})
    weights = data.get("weights", {})
    theta_init = data.get("theta_init")
    try:
        scenario = Scenario(
            chain=chain,
            base_type=data["base_type"],
            desired_path=path,
            obstacles=[Obstacle(o["center"], o["semi_axes"]) for o in data.get("obstacles", [])],
            joint_limits=[None if lim is None else (float(lim[0]), float(lim[1])) for lim in limits],
            joint_boundary=_boundary(boundary.get("joints")),
            base_boundary=_boundary(boundary.get("base")),
            w1=float(weights.get("w1", 100.0)),
            w2=float(weights.get("w2", 1.0)),
            T=float(disc.get("T", 10.0)),
            q=q,
            m=m,
            m_base=int(disc.get("m_base", m)),
            base_radius=float(data.get("base_radius", 0.0)),
            collision_margin=float(data.get("collision_margin", 0.0)),
            theta_init=None if theta_init is None else np.asarray(theta_init, dtype=float),
            phi_init=data.get("phi_init"),
            name=data.get("name", "scenario"),
        )
    except ValueError as exc:
        raise ScenarioError(f"boundary: {exc}") from None
    return scenario.validate()


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    data.setdefault("name", path.stem)
    return scenario_from_dict(data)


BUNDLED_DIR = Path(__file__).parent / "data"


def bundled_scenario(name: str) -> Scenario:
    """Load one of the scenarios shipped with the package, e.g. ``"planar_hol"``."""
    return load_scenario(BUNDLED_DIR / f"{name}.json")
