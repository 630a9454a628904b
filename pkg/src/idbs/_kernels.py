"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``IDBS_PURE_PYTHON=1``
to force the pure-Python fallback.
"""

import os

from . import _pykernels
from ._pykernels import (  # noqa: F401
    ADJACENT_STOP,
    BUDGET_STOP,
    RUNNING,
    SINGLE_STOP,
    WATCH_STOP,
)

BACKEND = "python"
if os.environ.get("IDBS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

f_series_kernel = _impl.f_series_kernel
critical_value_kernel = _impl.critical_value_kernel
lookup_tau_kernel = _impl.lookup_tau_kernel
run_phase_kernel = _impl.run_phase_kernel


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
