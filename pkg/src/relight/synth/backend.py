"""Ray-cast backend selection.

The compiled extension is preferred when importable; the numpy fallback is
used otherwise, or when RELIGHT_FORCE_NUMPY=1 is set.  Both produce
bit-identical output, so the switch never changes results, only speed.
"""

from __future__ import annotations

import os

from . import raycast_np

if os.environ.get("RELIGHT_FORCE_NUMPY") == "1":
    _impl = raycast_np
    _name = "numpy"
else:
    try:
        from . import _raycast as _impl  # type: ignore[no-redef]

        _name = "cython"
    except ImportError:
        _impl = raycast_np
        _name = "numpy"


def active_backend() -> str:
    return _name


def raycast(eye, dirs, spheres, boxes, wall_y, light_dir, shadow_bias=1e-7):
    return _impl.raycast(eye, dirs, spheres, boxes, wall_y, light_dir, shadow_bias)
