"""Kernel dispatch: compiled ``_ckernels`` when importable, numpy fallback otherwise.

Set ``SADDLELAB_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("SADDLELAB_PURE_PYTHON"):
    try:  # pragma: no cover - depends on build
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

RETRACT_NONE = _pykernels.RETRACT_NONE
RETRACT_XY = _pykernels.RETRACT_XY

# batch kernels without a compiled variant stay on numpy
eval_lift = _pykernels.eval_lift
lift_jacobian = _pykernels.lift_jacobian
normalize_rows = _pykernels.normalize_rows

green_batch = _impl.green_batch
forward_orbit = _impl.forward_orbit
lyapunov_qr = _impl.lyapunov_qr


def backends():
    """Return ``{name: module}`` for every available backend (used by the benchmark)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
