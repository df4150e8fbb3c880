"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``SPRAYHOLONOMY_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _kernels_py

if os.environ.get("SPRAYHOLONOMY_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

python_kernels = _kernels_py


def compiled_kernels():
    """Return the compiled kernel module, or None if it is not built."""
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels
