"""Hot numerical kernels, compiled when available.

The Cython module ``_ckernels`` is used if it imports; otherwise the
pure-Python twin ``_pykernels`` is used. Set ``LYMDO_PURE_PYTHON=1`` to force
the fallback. ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels

if os.environ.get("LYMDO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

local_cpu_objective = _impl.local_cpu_objective
fibonacci_local_cpu = _impl.fibonacci_local_cpu
bandwidth_marginal = _impl.bandwidth_marginal
bandwidth_kkt = _impl.bandwidth_kkt
md1_mean_sojourn = _impl.md1_mean_sojourn

__all__ = [
    "BACKEND",
    "local_cpu_objective",
    "fibonacci_local_cpu",
    "bandwidth_marginal",
    "bandwidth_kkt",
    "md1_mean_sojourn",
]
