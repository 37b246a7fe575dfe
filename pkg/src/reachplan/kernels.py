"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``REACHPLAN_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by the equivalence tests).
"""

import os

BACKEND = "python"

if os.environ.get("REACHPLAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import (  # noqa: F401
            ego_rhs,
            hull_2d_indices,
            polygon_distance,
            rk4_step,
            rk4_step_jac,
            segment_distance,
            shoot_jac,
        )

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import (  # noqa: F401
        ego_rhs,
        hull_2d_indices,
        polygon_distance,
        rk4_step,
        rk4_step_jac,
        segment_distance,
        shoot_jac,
    )

__all__ = [
    "BACKEND",
    "ego_rhs",
    "hull_2d_indices",
    "polygon_distance",
    "rk4_step",
    "rk4_step_jac",
    "segment_distance",
    "shoot_jac",
]
