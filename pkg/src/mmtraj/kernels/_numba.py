"""Loop kernels compiled with numba; same signatures as the numpy backend."""

import numba
import numpy as np

from ..linalg import FactorizationError

_opts = dict(cache=True, nogil=True, fastmath=False)


@numba.njit(**_opts)
def _cholesky_solve_inplace(H, b, x):
    """Solve ``(H + shift I) x = b``; returns False if the matrix is not PD."""
    d = H.shape[0]
    tr = 0.0
    for i in range(d):
        tr += H[i, i]
    scale = max(1.0, tr / d)
    L = np.empty((d, d))
    for attempt in range(3):
        if attempt == 0:
            shift = 1e-10 * max(tr, 0.0) / d
        elif attempt == 1:
            shift = 1e-9 * scale
        else:
            shift = 1e-6 * scale
        ok = True
        for j in range(d):
            s = H[j, j] + shift
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if s <= 0.0 or not np.isfinite(s):
                ok = False
                break
            L[j, j] = np.sqrt(s)
            for i in range(j + 1, d):
                s = H[i, j]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                L[i, j] = s / L[j, j]
        if ok:
            for i in range(d):
                s = b[i]
                for k in range(i):
                    s -= L[i, k] * x[k]
                x[i] = s / L[i, i]
            for i in range(d - 1, -1, -1):
                s = x[i]
                for k in range(i + 1, d):
                    s -= L[k, i] * x[k]
                x[i] = s / L[i, i]
            return True
    return False


@numba.njit(**_opts)
def _batched_spd_solve(H, rhs, out):
    for k in range(H.shape[0]):
        if not _cholesky_solve_inplace(H[k], rhs[k], out[k]):
            return k
    return -1


@numba.njit(parallel=True, **_opts)
def _batched_spd_solve_parallel(H, rhs, out):
    ok = np.ones(H.shape[0], dtype=np.bool_)
    for k in numba.prange(H.shape[0]):
        ok[k] = _cholesky_solve_inplace(H[k], rhs[k], out[k])
    for k in range(H.shape[0]):
        if not ok[k]:
            return k
    return -1


def batched_spd_solve(H, rhs, parallel=False):
    H = np.ascontiguousarray(H, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    out = np.empty_like(rhs)
    bad = (_batched_spd_solve_parallel if parallel else _batched_spd_solve)(H, rhs, out)
    if bad >= 0:
        raise FactorizationError(f"Hessian {bad} failed to factor after regularization fallback")
    return out


@numba.njit(**_opts)
def _linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph, xb, x_d,
                      lam_f1, lam_f2, rho_f1, rho_f2, H, rhs):
    q, n = v_th.shape
    d = 3 * n
    A2 = np.zeros((d, d))
    b2 = np.empty(d)
    A1 = np.zeros((3, d))
    b1 = np.empty(3)
    R = np.empty((3, 3))
    Rh = np.zeros((3, 3))
    for tt in range(q):
        A2[:, :] = 0.0
        for j in range(n):
            for a in range(3):
                A2[3 * j + a, 3 * j + a] = -1.0
                b2[3 * j + a] = -t[j, a]
        for j in range(n):
            for a in range(3):
                for b in range(3):
                    R[a, b] = A0[j, a, b] + Ac[j, a, b] * v_th[tt, j] + As[j, a, b] * w_th[tt, j]
            if j < n - 1:
                for a in range(3):
                    for b in range(3):
                        A2[3 * j + a, 3 * (j + 1) + b] = R[a, b]
            else:
                for a in range(3):
                    s = 0.0
                    for b in range(3):
                        s += R[a, b] * tool[b]
                    b2[3 * j + a] -= s
        for r in range(d):
            b2[r] -= lam_f2[tt, r] / (2.0 * rho_f2)
        Rh[0, 0] = v_ph[tt]
        Rh[0, 1] = -w_ph[tt]
        Rh[1, 0] = w_ph[tt]
        Rh[1, 1] = v_ph[tt]
        Rh[2, 2] = 1.0
        for a in range(3):
            s = x_d[tt, a]
            for b in range(3):
                s -= Rh[a, b] * l_x0[b]
                acc = 0.0
                for k in range(3):
                    acc += Rh[a, k] * l0R[k, b]
                A1[a, b] = acc
            if a < 2:
                s -= xb[tt, a]
            b1[a] = s - lam_f1[tt, a] / (2.0 * rho_f1)
        for r in range(d):
            for c in range(r, d):
                s2 = 0.0
                for k in range(d):
                    s2 += A2[k, r] * A2[k, c]
                s1 = 0.0
                if r < 3 and c < 3:
                    for k in range(3):
                        s1 += A1[k, r] * A1[k, c]
                val = 2.0 * rho_f2 * s2 + 2.0 * rho_f1 * s1
                H[tt, r, c] = val
                H[tt, c, r] = val
            s2 = 0.0
            for k in range(d):
                s2 += A2[k, r] * b2[k]
            s1 = 0.0
            if r < 3:
                for k in range(3):
                    s1 += A1[k, r] * b1[k]
            rhs[tt, r] = 2.0 * rho_f2 * s2 + 2.0 * rho_f1 * s1


def linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph, xb, x_d,
                     lam_f1, lam_f2, rho_f1, rho_f2):
    q, n = v_th.shape
    H = np.empty((q, 3 * n, 3 * n))
    rhs = np.empty((q, 3 * n))
    _linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph,
                      np.ascontiguousarray(xb), x_d, lam_f1, lam_f2,
                      float(rho_f1), float(rho_f2), H, rhs)
    return H, rhs


def solve_linkpoints(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph, xb, x_d,
                     lam_f1, lam_f2, rho_f1, rho_f2, parallel=False):
    q, n = v_th.shape
    H, rhs = linkpoint_system(A0, Ac, As, t, tool, l0R, l_x0, v_th, w_th, v_ph, w_ph,
                              xb, x_d, lam_f1, lam_f2, rho_f1, rho_f2)
    X = np.empty((q, n + 1, 3))
    X[:, :n] = batched_spd_solve(H, rhs, parallel).reshape(q, n, 3)
    X[:, n] = tool
    return X


@numba.njit(**_opts)
def _solve_trig_theta(A0, Ac, As, t, X, cos_ref, sin_ref, lam_f2, lam_v, lam_w,
                      rho_f2, rho_vw, v_out, w_out):
    q, n = cos_ref.shape
    a2 = 2.0 * rho_f2
    c2 = 2.0 * rho_vw
    gv = np.empty(3)
    gw = np.empty(3)
    h = np.empty(3)
    for tt in range(q):
        for j in range(n):
            for a in range(3):
                sv = 0.0
                sw = 0.0
                s0 = 0.0
                for b in range(3):
                    xb = X[tt, j + 1, b]
                    sv += Ac[j, a, b] * xb
                    sw += As[j, a, b] * xb
                    s0 += A0[j, a, b] * xb
                gv[a] = sv
                gw[a] = sw
                h[a] = X[tt, j, a] - s0 - t[j, a] - lam_f2[tt, 3 * j + a] / (2.0 * rho_f2)
            h11 = c2
            h12 = 0.0
            h22 = c2
            r1 = c2 * cos_ref[tt, j] - lam_v[tt, j]
            r2 = c2 * sin_ref[tt, j] - lam_w[tt, j]
            for a in range(3):
                h11 += a2 * gv[a] * gv[a]
                h12 += a2 * gv[a] * gw[a]
                h22 += a2 * gw[a] * gw[a]
                r1 += a2 * gv[a] * h[a]
                r2 += a2 * gw[a] * h[a]
            shift = 1e-10 * (h11 + h22) / 2.0
            h11 += shift
            h22 += shift
            det = h11 * h22 - h12 * h12
            v_out[tt, j] = (h22 * r1 - h12 * r2) / det
            w_out[tt, j] = (h11 * r2 - h12 * r1) / det


def solve_trig_theta(A0, Ac, As, t, X, cos_ref, sin_ref, lam_f2, lam_v, lam_w, rho_f2, rho_vw):
    v = np.empty_like(cos_ref)
    w = np.empty_like(cos_ref)
    _solve_trig_theta(A0, Ac, As, t, np.ascontiguousarray(X), cos_ref, sin_ref, lam_f2,
                      lam_v, lam_w, float(rho_f2), float(rho_vw), v, w)
    return v, w


@numba.njit(**_opts)
def _solve_trig_phi(y, xb, x_d, xdot, ydot, cos_ref, sin_ref, lam_f1, lam_f3, lam_v, lam_w,
                    rho_f1, rho_f3, rho_vw, nonholonomic, v_out, w_out):
    a2 = 2.0 * rho_f1
    c2 = 2.0 * rho_vw
    b2 = 2.0 * rho_f3
    for tt in range(y.shape[0]):
        r0 = x_d[tt, 0] - xb[tt, 0] - lam_f1[tt, 0] / (2.0 * rho_f1)
        r1_ = x_d[tt, 1] - xb[tt, 1] - lam_f1[tt, 1] / (2.0 * rho_f1)
        y0 = y[tt, 0]
        y1 = y[tt, 1]
        h11 = a2 * (y0 * y0 + y1 * y1) + c2
        h12 = 0.0
        h22 = h11
        r1 = a2 * (y0 * r0 + y1 * r1_) + c2 * cos_ref[tt] - lam_v[tt]
        r2 = a2 * (-y1 * r0 + y0 * r1_) + c2 * sin_ref[tt] - lam_w[tt]
        if nonholonomic:
            r3 = -lam_f3[tt] / (2.0 * rho_f3)
            h11 += b2 * ydot[tt] * ydot[tt]
            h12 -= b2 * ydot[tt] * xdot[tt]
            h22 += b2 * xdot[tt] * xdot[tt]
            r1 -= b2 * ydot[tt] * r3
            r2 += b2 * xdot[tt] * r3
        shift = 1e-10 * (h11 + h22) / 2.0
        h11 += shift
        h22 += shift
        det = h11 * h22 - h12 * h12
        v_out[tt] = (h22 * r1 - h12 * r2) / det
        w_out[tt] = (h11 * r2 - h12 * r1) / det


def solve_trig_phi(y, xb, x_d, xdot, ydot, cos_ref, sin_ref, lam_f1, lam_f3, lam_v, lam_w,
                   rho_f1, rho_f3, rho_vw, nonholonomic):
    v = np.empty(y.shape[0])
    w = np.empty(y.shape[0])
    _solve_trig_phi(np.ascontiguousarray(y), np.ascontiguousarray(xb), x_d, xdot, ydot,
                    cos_ref, sin_ref, lam_f1, lam_f3, lam_v, lam_w,
                    float(rho_f1), float(rho_f3), float(rho_vw), bool(nonholonomic), v, w)
    return v, w


@numba.njit(**_opts)
def _forward_kinematics(A0, Ac, As, t, tool, theta, X):
    q, n = theta.shape
    for tt in range(q):
        for a in range(3):
            X[tt, n, a] = tool[a]
        for i in range(n, 0, -1):
            c = np.cos(theta[tt, i - 1])
            s = np.sin(theta[tt, i - 1])
            for a in range(3):
                acc = t[i - 1, a]
                for b in range(3):
                    acc += (A0[i - 1, a, b] + Ac[i - 1, a, b] * c + As[i - 1, a, b] * s) * X[tt, i, b]
                X[tt, i - 1, a] = acc


def forward_kinematics(A0, Ac, As, t, tool, theta):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    X = np.empty((theta.shape[0], theta.shape[1] + 1, 3))
    _forward_kinematics(A0, Ac, As, t, tool, theta, X)
    return X
