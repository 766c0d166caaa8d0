"""Select the kernel implementation at import time.

The compiled extension is used when it was built; setting
``FRANK_DEFECT_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

if os.environ.get("FRANK_DEFECT_PURE_PYTHON") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND

__all__ = ["kernels", "BACKEND"]
