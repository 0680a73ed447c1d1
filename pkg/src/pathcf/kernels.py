"""Kernel dispatch: compiled extension when importable, pure Python otherwise.

Set ``PATHCF_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("PATHCF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

simple_walks = _impl.simple_walks
temporal_walks = _impl.temporal_walks
sgns_epoch = _impl.sgns_epoch

__all__ = ["BACKEND", "simple_walks", "temporal_walks", "sgns_epoch"]
