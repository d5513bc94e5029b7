"""Backend selection: compiled kernels when available, pure Python otherwise.

The compiled extension is optional; ``SEIRCTL_BACKEND=python`` or
``SEIRCTL_BACKEND=compiled`` forces a choice (the latter raises if the
extension is missing).
"""

from __future__ import annotations

import os

_forced = os.environ.get("SEIRCTL_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _core_py as kernels
elif _forced == "compiled":
    from . import _core as kernels  # type: ignore[attr-defined]
else:
    if _forced:
        raise ImportError(
            f"SEIRCTL_BACKEND={_forced!r} not recognized; use 'python' or 'compiled'"
        )
    try:
        from . import _core as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as kernels

COMPILED: bool = bool(kernels.COMPILED)
BACKEND_NAME: str = "compiled" if COMPILED else "python"

__all__ = ["kernels", "COMPILED", "BACKEND_NAME"]
