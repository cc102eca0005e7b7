"""Backend selection for the numerical inner loops.

The compiled extension ``fecgcs._kernels`` is used when it imports cleanly;
otherwise the NumPy twins in ``fecgcs._kernels_py`` are used. Setting the
environment variable ``FECGCS_PURE_PYTHON=1`` forces the NumPy path.

``BACKEND`` names the active implementation ("cython" or "python").
"""
import os

from . import _kernels_py

if os.environ.get("FECGCS_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

scatter_rows = _impl.scatter_rows
gather_rows = _impl.gather_rows
block_gram = _impl.block_gram
dwt_step = _impl.dwt_step
idwt_step = _impl.idwt_step


def available_backends():
    """Return {name: module} for every importable kernel backend."""
    backends = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
