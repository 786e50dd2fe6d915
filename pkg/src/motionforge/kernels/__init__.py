"""Hot per-pixel kernels with a compiled core and a NumPy fallback.

The compiled extension is preferred when importable; set
MOTIONFORGE_KERNELS=py or =c to force one side (used by the cross-check
tests and the benchmark).
"""

import os

_forced = os.environ.get("MOTIONFORGE_KERNELS", "").strip().lower()

if _forced == "py":
    from . import _pykernels as _impl
elif _forced == "c":
    from . import _ckernels as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pykernels as _impl  # type: ignore[no-redef]

dilate = _impl.dilate
erode = _impl.erode
boundary = _impl.boundary
mean_hsv_diff = _impl.mean_hsv_diff
nearest_depth_delta = _impl.nearest_depth_delta


def backend_name() -> str:
    """Which implementation is active: "cython" or "numpy"."""
    return _impl.NAME
