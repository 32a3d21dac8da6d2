"""Bernstein-polynomial trajectory parametrization and its affine constraint rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import block_diag


@dataclass(frozen=True)
class TrajectoryBasis:
    """Sampled basis values ``P0`` and exact time derivatives ``P1``, ``P2``.

    All three matrices have shape ``(q, m)``; a trajectory with coefficients
    ``c`` is ``P0 @ c`` on the uniform grid `times`.
    """

    times: np.ndarray
    P0: np.ndarray
    P1: np.ndarray
    P2: np.ndarray

    @property
    def q(self) -> int:
        return self.P0.shape[0]

    @property
    def m(self) -> int:
        return self.P0.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def derivative(self, order: int) -> np.ndarray:
        return (self.P0, self.P1, self.P2)[order]

    def fit(self, values) -> np.ndarray:
        """Least-squares coefficients for samples `values` of shape ``(q,)`` or ``(q, k)``."""
        return np.linalg.lstsq(self.P0, np.asarray(values, dtype=float), rcond=None)[0]


def _bernstein(degree: int, s: np.ndarray) -> np.ndarray:
    """Columns ``C(N, k) s^k (1 - s)^(N - k)`` for ``k = 0..N``; empty for N < 0."""
    if degree < 0:
        return np.zeros((s.size, 0))
    k = np.arange(degree + 1)
    binom = np.array([comb(degree, j) for j in k], dtype=float)
    return binom * s[:, None] ** k * (1.0 - s[:, None]) ** (degree - k)


def build_basis(q: int, m: int, T: float) -> TrajectoryBasis:
    """Degree ``m - 1`` Bernstein basis sampled at `q` uniform times on ``[0, T]``."""
    if m < 4:
        raise ValueError(f"need at least 4 basis functions, got m={m}")
    if q < m:
        raise ValueError(f"q={q} samples cannot determine m={m} coefficients")
    if not T > 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    times = np.linspace(0.0, T, q)
    s = times / T
    N = m - 1
    P0 = _bernstein(N, s)
    B1 = _bernstein(N - 1, s)
    B2 = _bernstein(N - 2, s)
    # d/ds b_{k,N} = N (b_{k-1,N-1} - b_{k,N-1})
    D1 = np.zeros((q, m))
    D1[:, 1:] += B1
    D1[:, :-1] -= B1
    D1 *= N
    D2 = np.zeros((q, m))
    D2[:, 2:] += B2
    D2[:, 1:-1] -= 2.0 * B2
    D2[:, :-2] += B2
    D2 *= N * (N - 1)
    return TrajectoryBasis(times, P0, D1 / T, D2 / T**2)


@dataclass
class BoundarySpec:
    """Endpoint conditions for one scalar channel.

    `initial` and `final` map derivative order (0, 1, 2) to a value. `cyclic`
    lists derivative orders whose start and end values must agree.
    """

    initial: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    cyclic: tuple = ()

    def __post_init__(self):
        self.initial = {int(k): float(v) for k, v in self.initial.items()}
        self.final = {int(k): float(v) for k, v in self.final.items()}
        self.cyclic = tuple(int(k) for k in self.cyclic)
        for k in (*self.initial, *self.final, *self.cyclic):
            if k not in (0, 1, 2):
                raise ValueError(f"derivative order must be 0, 1 or 2, got {k}")
        if not all(np.isfinite(v) for v in (*self.initial.values(), *self.final.values())):
            raise ValueError("boundary values must be finite")

    @classmethod
    def periodic(cls) -> "BoundarySpec":
        return cls(cyclic=(0, 1, 2))

    def is_empty(self) -> bool:
        return not (self.initial or self.final or self.cyclic)


def build_boundary_matrices(basis: TrajectoryBasis, spec: BoundarySpec):
    """Rows ``G`` and targets ``h`` such that ``G @ c = h`` enforces `spec`."""
    rows, rhs = [], []
    for k, val in sorted(spec.initial.items()):
        rows.append(basis.derivative(k)[0])
        rhs.append(val)
    for k, val in sorted(spec.final.items()):
        rows.append(basis.derivative(k)[-1])
        rhs.append(val)
    for k in spec.cyclic:
        D = basis.derivative(k)
        rows.append(D[0] - D[-1])
        rhs.append(0.0)
    if not rows:
        return np.zeros((0, basis.m)), np.zeros(0)
    return np.array(rows), np.array(rhs)


def build_limit_matrices(basis: TrajectoryBasis, lower: float, upper: float):
    """``A @ c <= b`` iff every sample of ``P0 @ c`` lies in ``[lower, upper]``."""
    if not lower < upper:
        raise ValueError(f"lower limit {lower} must be below upper limit {upper}")
    q = basis.q
    A = np.vstack([basis.P0, -basis.P0])
    b = np.concatenate([np.full(q, float(upper)), np.full(q, -float(lower))])
    return A, b


def planar_block(M: np.ndarray) -> np.ndarray:
    """``blkdiag(M, M)``: the same rows applied to the x and y coefficient halves."""
    return block_diag(M, M)
