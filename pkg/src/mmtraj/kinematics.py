"""Revolute kinematic chains and the multi-affine split of forward kinematics.

Each joint maps the end-effector position expressed in its own frame to the
frame of the previous joint::

    x[i-1] = R_i(theta_i) @ x[i] + t_i,    R_i = A0 + Ac cos(theta_i) + As sin(theta_i)

with ``x[n] = tool_offset``. ``x[0]`` is the end-effector position in the
manipulator base frame. Holding the link points fixed makes every residual
affine in ``(cos theta_i, sin theta_i)`` and vice versa.

Chain descriptions use the modified (Craig) Denavit-Hartenberg convention::

    T_{i-1,i} = RotX(alpha) TransX(a) RotZ(theta + theta_offset) TransZ(d)

whose translation part does not depend on the joint angle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_E0 = np.diag([0.0, 0.0, 1.0])
_EC = np.diag([1.0, 1.0, 0.0])
_ES = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


class ChainError(ValueError):
    pass


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def skew(k):
    return np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])


@dataclass(frozen=True)
class JointTransform:
    """Rotation template ``A0 + Ac cos + As sin`` and constant offset ``t``."""

    A0: np.ndarray
    Ac: np.ndarray
    As: np.ndarray
    t: np.ndarray

    def rotation(self, theta=None, *, v=None, w=None):
        if theta is not None:
            v, w = np.cos(theta), np.sin(theta)
        return self.A0 + self.Ac * v + self.As * w

    @classmethod
    def about_axis(cls, fixed_rotation, axis, translation) -> "JointTransform":
        """Joint rotating about unit `axis` after a constant `fixed_rotation`."""
        F = np.asarray(fixed_rotation, dtype=float)
        k = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(k)
        if norm == 0:
            raise ChainError("joint axis must be non-zero")
        k = k / norm
        kk = np.outer(k, k)
        return cls(F @ kk, F @ (np.eye(3) - kk), F @ skew(k), np.asarray(translation, dtype=float))

    @classmethod
    def from_dh(cls, a=0.0, alpha=0.0, d=0.0, theta_offset=0.0) -> "JointTransform":
        F = rot_x(alpha) @ rot_z(theta_offset)
        t = np.array([a, -np.sin(alpha) * d, np.cos(alpha) * d])
        return cls(F @ _E0, F @ _EC, F @ _ES, t)


@dataclass(frozen=True)
class KinematicChain:
    joints: tuple
    tool_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mount_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    mount_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def n(self) -> int:
        return len(self.joints)

    # stacked (n, 3, 3) / (n, 3) arrays for the vectorized kernels
    @property
    def A0(self):
        return np.stack([j.A0 for j in self.joints])

    @property
    def Ac(self):
        return np.stack([j.Ac for j in self.joints])

    @property
    def As(self):
        return np.stack([j.As for j in self.joints])

    @property
    def t(self):
        return np.stack([j.t for j in self.joints])


def _check_orthonormal(R, tol, what):
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > tol:
        raise ChainError(f"{what} is not orthonormal (max |R^T R - I| = {err:.2e})")


def validate_chain(chain: KinematicChain, samples: int = 50, seed: int = 0) -> None:
    if chain.n < 1:
        raise ChainError("a chain needs at least one joint")
    _check_orthonormal(np.asarray(chain.mount_rotation), 1e-12, "mount rotation")
    rng = np.random.default_rng(seed)
    for i, joint in enumerate(chain.joints):
        for theta in rng.uniform(-np.pi, np.pi, samples):
            _check_orthonormal(joint.rotation(theta), 1e-10, f"joint {i + 1} rotation")


def load_chain(spec: dict) -> KinematicChain:
    """Build a chain from a declarative description.

    Each entry of ``spec["joints"]`` is either modified-DH parameters
    (``a``, ``alpha``, ``d``, ``theta_offset``; all optional, default 0) or an
    explicit joint ``{"rotation": 3x3, "axis": 3, "translation": 3}``.
    Optional keys: ``tool_offset`` and ``mount`` (``{"R": 3x3, "t": 3}``).
    """
    joints = []
    for i, js in enumerate(spec.get("joints", [])):
        if "axis" in js:
            joints.append(JointTransform.about_axis(
                js.get("rotation", np.eye(3)), js["axis"], js.get("translation", np.zeros(3))))
        else:
            unknown = set(js) - {"a", "alpha", "d", "theta_offset", "name"}
            if unknown:
                raise ChainError(f"joint {i + 1}: unknown DH keys {sorted(unknown)}")
            joints.append(JointTransform.from_dh(
                js.get("a", 0.0), js.get("alpha", 0.0), js.get("d", 0.0), js.get("theta_offset", 0.0)))
    mount = spec.get("mount", {})
    chain = KinematicChain(
        joints=tuple(joints),
        tool_offset=np.asarray(spec.get("tool_offset", np.zeros(3)), dtype=float),
        mount_rotation=np.asarray(mount.get("R", np.eye(3)), dtype=float),
        mount_offset=np.asarray(mount.get("t", np.zeros(3)), dtype=float),
    )
    validate_chain(chain)
    return chain


def planar_chain(lengths) -> KinematicChain:
    """Planar serial arm with z-axis joints; the last length becomes the tool offset."""
    lengths = list(lengths)
    joints = [JointTransform.from_dh(a=a) for a in [0.0] + lengths[:-1]]
    chain = KinematicChain(tuple(joints), tool_offset=np.array([lengths[-1], 0.0, 0.0]))
    validate_chain(chain)
    return chain


def forward_kinematics(chain: KinematicChain, theta) -> np.ndarray:
    """Link points for joint angles `theta` of shape ``(..., n)``.

    Returns an array of shape ``(..., n + 1, 3)`` whose entry ``i`` is the
    end-effector position resolved in the frame of joint ``i``; entry 0 is the
    end-effector in the manipulator base frame and entry ``n`` the tool offset.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != chain.n:
        raise ValueError(f"expected {chain.n} joint angles, got {theta.shape[-1]}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("joint angles must be finite")
    c, s = np.cos(theta), np.sin(theta)
    x = np.empty(theta.shape[:-1] + (chain.n + 1, 3))
    x[..., chain.n, :] = chain.tool_offset
    for i in range(chain.n, 0, -1):
        jt = chain.joints[i - 1]
        xi = x[..., i, :]
        x[..., i - 1, :] = (
            xi @ jt.A0.T
            + c[..., i - 1, None] * (xi @ jt.Ac.T)
            + s[..., i - 1, None] * (xi @ jt.As.T)
            + jt.t
        )
    return x


def end_effector(chain: KinematicChain, theta) -> np.ndarray:
    return forward_kinematics(chain, theta)[..., 0, :]


def build_f2_in_trig(chain: KinematicChain, linkpoints):
    """FK residual as ``G @ [v; w] - h`` with the link points held fixed.

    Row block ``i - 1`` is ``R_i x[i] + t_i - x[i-1]``. Column ``i - 1`` holds
    the cosine coefficient of joint ``i`` and column ``n + i - 1`` the sine
    coefficient. `linkpoints` may carry leading batch dimensions.
    """
    X = np.asarray(linkpoints, dtype=float)
    n = chain.n
    if X.shape[-2:] != (n + 1, 3):
        raise ValueError(f"link points must have trailing shape {(n + 1, 3)}, got {X.shape}")
    lead = X.shape[:-2]
    xi = X[..., 1:, :]
    G = np.zeros(lead + (n, 3, 2 * n))
    idx = np.arange(n)
    G[..., idx, :, idx] = np.moveaxis(np.einsum("jab,...jb->...ja", chain.Ac, xi), -2, 0)
    G[..., idx, :, n + idx] = np.moveaxis(np.einsum("jab,...jb->...ja", chain.As, xi), -2, 0)
    h = X[..., :-1, :] - np.einsum("jab,...jb->...ja", chain.A0, xi) - chain.t
    return G.reshape(lead + (3 * n, 2 * n)), h.reshape(lead + (3 * n,))


def build_f2_in_x(chain: KinematicChain, v_theta, w_theta):
    """FK residual as ``A_x @ vec(linkpoints) - b_x`` with the trig variables held fixed."""
    v = np.asarray(v_theta, dtype=float)
    w = np.asarray(w_theta, dtype=float)
    n = chain.n
    if v.shape != (n,) or w.shape != (n,):
        raise ValueError(f"v and w must have shape ({n},)")
    A = np.zeros((3 * n, 3 * (n + 1)))
    for i in range(1, n + 1):
        r = slice(3 * (i - 1), 3 * i)
        A[r, 3 * (i - 1):3 * i] = -np.eye(3)
        A[r, 3 * i:3 * (i + 1)] = chain.joints[i - 1].rotation(v=v[i - 1], w=w[i - 1])
    b = -chain.t.reshape(-1)
    return A, b


def mount_point(chain: KinematicChain, x0_e):
    """End-effector relative to the mobile-base origin, in the mobile-base frame."""
    return chain.mount_offset + np.asarray(x0_e, dtype=float) @ chain.mount_rotation.T


def build_f1_blocks(x0_e, chain: KinematicChain):
    """Loop-closure coefficients for the base heading.

    Returns ``(G, d)`` with ``x_b + Rz(phi) (l_x0 + l0R x0_e) = x_b + G @ [cos phi, sin phi] + d``.
    ``G`` has a zero z-row; the heading-independent height sits in ``d``.
    Batched over leading dimensions of `x0_e`.
    """
    y = mount_point(chain, x0_e)
    G = np.zeros(y.shape[:-1] + (3, 2))
    G[..., 0, 0] = y[..., 0]
    G[..., 0, 1] = -y[..., 1]
    G[..., 1, 0] = y[..., 1]
    G[..., 1, 1] = y[..., 0]
    d = np.zeros(y.shape)
    d[..., 2] = y[..., 2]
    return G, d


def heading_rotation(v, w):
    """Planar rotation about z with cosine `v` and sine `w` (not renormalized)."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    R = np.zeros(v.shape + (3, 3))
    R[..., 0, 0] = v
    R[..., 0, 1] = -w
    R[..., 1, 0] = w
    R[..., 1, 1] = v
    R[..., 2, 2] = 1.0
    return R


def world_end_effector(chain: KinematicChain, theta, base_xy, phi):
    """End-effector position in the global frame for arm angles and base pose."""
    x0 = end_effector(chain, theta)
    y = mount_point(chain, x0)
    R = heading_rotation(np.cos(phi), np.sin(phi))
    out = np.einsum("...ab,...b->...a", R, y)
    out[..., :2] += base_xy
    return out
