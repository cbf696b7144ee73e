"""Kernel backend selection.

The compiled extension is preferred; the pure-Python implementation is the
fallback and can be forced with the STMAP_PURE_PYTHON environment variable.
Both expose the same functions with identical semantics.
"""

import os

from . import _py

if os.environ.get("STMAP_PURE_PYTHON", "").strip() not in ("", "0"):
    impl = _py
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _py

BACKEND = impl.BACKEND

footpad_max = impl.footpad_max
mask_extremes = impl.mask_extremes
mask_extremes_gauss3 = impl.mask_extremes_gauss3
disk_max_arg = impl.disk_max_arg
exact_scan = impl.exact_scan
rasterize_triangulation = impl.rasterize_triangulation
grf_fill_cells = impl.grf_fill_cells
