"""Per-timestep kernels behind a backend switch.

The backend is chosen once at import from ``MMTRAJ_BACKEND``: ``numba``
(default when numba imports) or ``numpy``. Both implementations stay
importable as `numpy_backend` and `numba_backend` for comparison.
"""

import logging
import os

from . import _numpy as numpy_backend

logger = logging.getLogger(__name__)

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

_requested = os.environ.get("MMTRAJ_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"MMTRAJ_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and numba_backend is None:
    logger.warning("numba unavailable, falling back to the numpy kernels")
    _requested = "numpy"

BACKEND = _requested
_impl = numba_backend if BACKEND == "numba" else numpy_backend


def get_backend(name=None):
    """Kernel module for `name` (``"numba"`` / ``"numpy"``), or the active one."""
    if name is None:
        return _impl
    if name == "numba":
        if numba_backend is None:
            raise RuntimeError("numba backend unavailable")
        return numba_backend
    if name == "numpy":
        return numpy_backend
    raise ValueError(f"unknown backend {name!r}")


batched_spd_solve = _impl.batched_spd_solve
linkpoint_system = _impl.linkpoint_system
solve_linkpoints = _impl.solve_linkpoints
solve_trig_theta = _impl.solve_trig_theta
solve_trig_phi = _impl.solve_trig_phi
forward_kinematics = _impl.forward_kinematics
