"""Select the simplex pivot kernel at import time.

The compiled Cython kernel is used when it was built; otherwise (or when
``PIDECISION_PURE_PYTHON`` is set) the numpy fallback runs.
"""
import os
from types import SimpleNamespace

from . import _kernel_py

OPTIMAL = _kernel_py.OPTIMAL
UNBOUNDED = _kernel_py.UNBOUNDED
ITERATION_LIMIT = _kernel_py.ITERATION_LIMIT

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": SimpleNamespace(name="python", pivot=_kernel_py.pivot, pivot_loop=_kernel_py.pivot_loop)}
if _compiled is not None:
    _KERNELS["compiled"] = SimpleNamespace(
        name="compiled", pivot=_compiled.pivot, pivot_loop=_compiled.pivot_loop
    )

if _compiled is not None and not os.environ.get("PIDECISION_PURE_PYTHON"):
    DEFAULT = "compiled"
else:
    DEFAULT = "python"


def available():
    return sorted(_KERNELS)


def get_kernel(name=None):
    name = name or DEFAULT
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown LP backend {name!r}; available: {available()}") from None
