"""Kernel selection: the compiled extension when importable, else numpy/Python.

Set ``HASHGRID_PURE_PYTHON=1`` to force the fallback.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

kernels = _pykernels
if os.environ.get("HASHGRID_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        log.info("compiled kernels unavailable, using the pure-Python fallback")

BACKEND = kernels.BACKEND
