"""Kernel selection at import: compiled core if built, else pure Python.

Set ``REPEATCAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("REPEATCAP_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
