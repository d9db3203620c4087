"""Kernel selection: compiled extension when importable, else pure Python.

Set ``OPMDRIVE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from opmdrive import _core_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("OPMDRIVE_PURE_PYTHON", "") not in ("", "0"):
        return _core_py, "python"
    try:
        from opmdrive import _core  # type: ignore[attr-defined]
    except ImportError:
        return _core_py, "python"
    return _core, "cython"


kernels, BACKEND = _load()

forward_backward = kernels.forward_backward
dp_sweep = kernels.dp_sweep
rk4_step = kernels.rk4_step
bicycle_deriv = kernels.bicycle_deriv
