"""Vectorized numpy implementations of the per-timestep kernels."""

import numpy as np

from ..linalg import FactorizationError

_FALLBACK = (1e-9, 1e-6)


def batched_spd_solve(H, rhs, parallel=False):
    """Solve ``(H_k + reg_k I) x_k = rhs_k`` for a stack of SPD matrices.

    `parallel` is accepted for signature parity and ignored; numpy's batched
    LAPACK calls already use the BLAS thread pool.

    ``reg_k`` is ``1e-10 * trace(H_k) / d``, escalated like `linalg.solve_convex_qp`.
    """
    d = H.shape[-1]
    tr = np.trace(H, axis1=-2, axis2=-1)
    eye = np.eye(d)
    scale = np.maximum(1.0, tr / d)
    for shift in (1e-10 * np.maximum(tr, 0.0) / d, _FALLBACK[0] * scale, _FALLBACK[1] * scale):
        try:
            L = np.linalg.cholesky(H + shift[..., None, None] * eye)
        except np.linalg.LinAlgError:
            continue
        y = np.linalg.solve(L, rhs[..., None])
        return np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]
    raise FactorizationError("batched Hessian failed to factor after regularization fallback")


def joint_rotations(A0, Ac, As, v, w):
    """``R[t, i] = A0_i + Ac_i v[t, i] + As_i w[t, i]``, shape ``(q, n, 3, 3)``."""
    return A0 + Ac * v[..., None, None] + As * w[..., None, None]


def heading_matrices(v, w):
    q = v.shape[0]
    R = np.zeros((q, 3, 3))
    R[:, 0, 0] = v
    R[:, 0, 1] = -w
    R[:, 1, 0] = w
    R[:, 1, 1] = v
    R[:, 2, 2] = 1.0
    return R


def linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph, xb, x_d,
                     lam_f1, lam_f2, rho_f1, rho_f2):
    """Normal equations ``(H, rhs)`` of the per-timestep link-point QP.

    Unknowns per timestep are ``x[0..n-1]`` stacked; ``x[n]`` is the tool offset.
    """
    q, n = v_th.shape
    d = 3 * n
    R = joint_rotations(A0, Ac, As, v_th, w_th)
    A2 = np.zeros((q, n, 3, n, 3))
    idx = np.arange(n)
    A2[:, idx, :, idx, :] = -np.eye(3)
    if n > 1:
        A2[:, idx[:-1], :, idx[1:], :] = np.moveaxis(R[:, :-1], 1, 0)
    A2 = A2.reshape(q, d, d)
    b2 = np.broadcast_to(-t, (q, n, 3)).copy()
    b2[:, -1] -= R[:, -1] @ tool
    b2 = b2.reshape(q, d) - lam_f2 / (2.0 * rho_f2)
    Rh = heading_matrices(v_ph, w_ph)
    A1 = np.zeros((q, 3, d))
    A1[:, :, :3] = Rh @ l0R
    b1 = x_d - Rh @ l_x0
    b1[:, :2] -= xb
    b1 = b1 - lam_f1 / (2.0 * rho_f1)
    A2T = np.swapaxes(A2, 1, 2)
    A1T = np.swapaxes(A1, 1, 2)
    H = 2.0 * rho_f2 * (A2T @ A2) + 2.0 * rho_f1 * (A1T @ A1)
    rhs = 2.0 * rho_f2 * (A2T @ b2[..., None])[..., 0] + 2.0 * rho_f1 * (A1T @ b1[..., None])[..., 0]
    return H, rhs


def solve_linkpoints(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph, xb, x_d,
                     lam_f1, lam_f2, rho_f1, rho_f2, parallel=False):
    q, n = v_th.shape
    H, rhs = linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph,
                              xb, x_d, lam_f1, lam_f2, rho_f1, rho_f2)
    X = np.empty((q, n + 1, 3))
    X[:, :n] = batched_spd_solve(H, rhs).reshape(q, n, 3)
    X[:, n] = tool
    return X


def _solve2(h11, h12, h22, r1, r2):
    shift = 1e-10 * (h11 + h22) / 2.0
    h11 = h11 + shift
    h22 = h22 + shift
    det = h11 * h22 - h12 * h12
    return (h22 * r1 - h12 * r2) / det, (h11 * r2 - h12 * r1) / det


def solve_trig_theta(A0, Ac, As, t, X, cos_ref, sin_ref, lam_f2, lam_v, lam_w, rho_f2, rho_vw):
    """Per (timestep, joint) 2x2 solves for the cosine/sine copies."""
    q, n = cos_ref.shape
    xi = X[:, 1:, :]
    gv = np.einsum("jab,tjb->tja", Ac, xi)
    gw = np.einsum("jab,tjb->tja", As, xi)
    h = X[:, :-1, :] - np.einsum("jab,tjb->tja", A0, xi) - t - lam_f2.reshape(q, n, 3) / (2.0 * rho_f2)
    a = 2.0 * rho_f2
    c = 2.0 * rho_vw
    h11 = a * np.sum(gv * gv, -1) + c
    h12 = a * np.sum(gv * gw, -1)
    h22 = a * np.sum(gw * gw, -1) + c
    r1 = a * np.sum(gv * h, -1) + c * cos_ref - lam_v
    r2 = a * np.sum(gw * h, -1) + c * sin_ref - lam_w
    return _solve2(h11, h12, h22, r1, r2)


def solve_trig_phi(y, xb, x_d, xdot, ydot, cos_ref, sin_ref, lam_f1, lam_f3, lam_v, lam_w,
                   rho_f1, rho_f3, rho_vw, nonholonomic):
    """Per-timestep 2x2 solves for the heading cosine/sine copies.

    `y` is the arm tip relative to the base origin in the base frame, shape ``(q, 3)``.
    """
    a = 2.0 * rho_f1
    c = 2.0 * rho_vw
    r = x_d[:, :2] - xb - lam_f1[:, :2] / (2.0 * rho_f1)
    # f1 xy rows: [[y1, -y2], [y2, y1]] @ [v, w]
    h11 = a * (y[:, 0] ** 2 + y[:, 1] ** 2) + c
    h12 = np.zeros_like(h11)
    h22 = h11.copy()
    r1 = a * (y[:, 0] * r[:, 0] + y[:, 1] * r[:, 1]) + c * cos_ref - lam_v
    r2 = a * (-y[:, 1] * r[:, 0] + y[:, 0] * r[:, 1]) + c * sin_ref - lam_w
    if nonholonomic:
        # f3 row: [-ydot, xdot] @ [v, w]
        b = 2.0 * rho_f3
        r3 = -lam_f3 / (2.0 * rho_f3)
        h11 = h11 + b * ydot * ydot
        h12 = h12 - b * ydot * xdot
        h22 = h22 + b * xdot * xdot
        r1 = r1 - b * ydot * r3
        r2 = r2 + b * xdot * r3
    return _solve2(h11, h12, h22, r1, r2)


def forward_kinematics(A0, Ac, As, t, tool, theta):
    q, n = theta.shape
    c, s = np.cos(theta), np.sin(theta)
    X = np.empty((q, n + 1, 3))
    X[:, n] = tool
    for i in range(n, 0, -1):
        xi = X[:, i]
        X[:, i - 1] = xi @ A0[i - 1].T + c[:, i - 1, None] * (xi @ Ac[i - 1].T) \
            + s[:, i - 1, None] * (xi @ As[i - 1].T) + t[i - 1]
    return X
