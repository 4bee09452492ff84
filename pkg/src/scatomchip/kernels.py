"""Backend selection for the field kernels.

The compiled extension is used when it imports; otherwise (or when the
``SCATOMCHIP_PURE_PYTHON`` environment variable is set) the numpy fallback
is used.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("SCATOMCHIP_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

field_points = _impl.field_points
ellipke = _impl.ellipke
