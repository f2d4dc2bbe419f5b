"""Integration kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imports; set ``MAGORBIT_BACKEND=python``
to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
FieldKernel = _kernels_py.FieldKernel
PyFieldKernel = _kernels_py.FieldKernel
CyFieldKernel = None

try:
    from ._kernels import FieldKernel as CyFieldKernel
except ImportError:  # extension not built
    pass

if CyFieldKernel is not None and os.environ.get("MAGORBIT_BACKEND", "").lower() != "python":
    FieldKernel = CyFieldKernel
    BACKEND = "cython"

FOUND = _kernels_py.FOUND
NEWTON_FAILED = _kernels_py.NEWTON_FAILED
NO_RETURN = _kernels_py.NO_RETURN
NOT_FINITE = _kernels_py.NOT_FINITE

__all__ = ["BACKEND", "FieldKernel", "PyFieldKernel", "CyFieldKernel",
           "FOUND", "NEWTON_FAILED", "NO_RETURN", "NOT_FINITE"]
