"""Backend selection for the hot mesh kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise the
pure-Python twin is loaded. Set ``CPSCHWARZ_PURE_PYTHON=1`` to force the
fallback.
"""
import os

if os.environ.get("CPSCHWARZ_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl
        BACKEND = "python"

closest_points_mesh = _impl.closest_points_mesh
project_point_triangle = _impl.project_point_triangle

__all__ = ["BACKEND", "closest_points_mesh", "project_point_triangle"]
