"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``DRONENET_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DRONENET_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

search_assignments = _impl.search_assignments
simulate_core = _impl.simulate_core
delay_factor = _impl.delay_factor

__all__ = ["BACKEND", "search_assignments", "simulate_core", "delay_factor"]
