"""Backend selection: compiled extension when available, NumPy otherwise.

Set ``ZOHPDE_PURE_PYTHON=1`` to force the fallback (useful for parity
testing and benchmarking).
"""

from __future__ import annotations

import os

_force_pure = os.environ.get("ZOHPDE_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}

if _force_pure:
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME
advance_modal = _impl.advance_modal
theta_steps = _impl.theta_steps


def get_backends() -> dict:
    """All importable kernel backends, keyed by name."""
    from . import _kernels_py

    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
