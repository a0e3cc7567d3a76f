"""Pick the compiled kernels when available, else the numpy fallback.

Set ``PWLCF_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

kernels = _kernels_py
if not os.environ.get("PWLCF_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:
        pass

BACKEND = kernels.NAME


def compiled_kernels():
    """Return the compiled module or ``None`` if it was not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
