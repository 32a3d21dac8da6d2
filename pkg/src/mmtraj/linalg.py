"""Dense quadratic forms and the convex QP solve every ADMM block reduces to."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a regularized Hessian still fails to factor."""


@dataclass
class QuadraticForm:
    r"""The function :math:`\tfrac12 x^T H x + g^T x + c`."""

    H: np.ndarray
    g: np.ndarray
    c: float = 0.0

    @classmethod
    def zero(cls, d: int) -> "QuadraticForm":
        return cls(np.zeros((d, d)), np.zeros(d), 0.0)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x @ self.H @ x + self.g @ x + self.c

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return QuadraticForm(self.H + other.H, self.g + other.g, self.c + other.c)

    def gradient(self, x):
        return self.H @ x + self.g


def accumulate_least_squares(qf: QuadraticForm, A, b, weight: float) -> QuadraticForm:
    """Add ``weight * ||A x - b||^2`` to `qf` in place and return it."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[1] != qf.dim:
        raise ValueError(f"A has {A.shape[1]} columns, form has dimension {qf.dim}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    if not weight > 0:
        raise ValueError(f"weight must be positive, got {weight}")
    qf.H += 2.0 * weight * (A.T @ A)
    qf.g -= 2.0 * weight * (A.T @ b)
    qf.c += weight * float(b @ b)
    return qf


def accumulate_penalty(qf: QuadraticForm, A, b, multiplier, rho: float) -> QuadraticForm:
    """Add ``multiplier^T (A x - b) + rho ||A x - b||^2`` up to a constant.

    Completing the square gives ``rho ||A x - (b - multiplier / (2 rho))||^2``.
    """
    b = np.asarray(b, dtype=float) - np.asarray(multiplier, dtype=float) / (2.0 * rho)
    return accumulate_least_squares(qf, A, b, rho)


def default_regularization(H) -> float:
    d = H.shape[0]
    return 1e-10 * max(float(np.trace(H)), 0.0) / d


_FALLBACK_REGS = (1e-9, 1e-6)


def solve_convex_qp(qf: QuadraticForm, regularization: float | None = None) -> np.ndarray:
    """Minimize ``0.5 x^T (H + reg I) x + g^T x`` with a Cholesky factorization.

    Parameters
    ----------
    qf : QuadraticForm
        Form with symmetric positive semidefinite ``H``.
    regularization : float, optional
        Tikhonov shift. Defaults to ``1e-10 * trace(H) / d``. If the shifted
        matrix does not factor, the shift is escalated to 1e-9 and then 1e-6
        (relative to the mean diagonal when that exceeds one).

    Returns
    -------
    x : ndarray
    """
    H = qf.H
    if not np.allclose(H, H.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(H).max(initial=0.0))):
        raise ValueError("Hessian is not symmetric")
    reg = default_regularization(H) if regularization is None else float(regularization)
    if reg < 0:
        raise ValueError("regularization must be non-negative")
    d = qf.dim
    scale = max(1.0, float(np.trace(H)) / d) if d else 1.0
    attempts = [reg] + [max(reg, r * scale) for r in _FALLBACK_REGS]
    for shift in attempts:
        try:
            factor = sla.cho_factor(H + shift * np.eye(d), lower=True, check_finite=True)
        except np.linalg.LinAlgError:
            continue
        x = sla.cho_solve(factor, -qf.g)
        if np.all(np.isfinite(x)):
            return x
    cond = np.linalg.cond(H) if d else np.inf
    raise FactorizationError(
        f"Hessian of dimension {d} failed to factor after shift {attempts[-1]:.1e} "
        f"(condition number {cond:.3e})"
    )
