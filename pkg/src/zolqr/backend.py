"""Kernel backend selection.

The compiled extension (:mod:`zolqr._kernels`) is preferred when importable;
otherwise the numpy implementation (:mod:`zolqr._kernels_py`) is used.  Set
``ZOLQR_BACKEND=pure`` or ``ZOLQR_BACKEND=compiled`` to force a choice (the
latter raises if the extension was not built).

Both backends satisfy the same numerical contracts; results can differ in
the last few ulps, so byte-level trace reproducibility is guaranteed per
backend, not across backends.
"""

from __future__ import annotations

import os

from zolqr import _kernels_py

_requested = os.environ.get("ZOLQR_BACKEND", "").strip().lower()

if _requested == "pure":
    _impl = _kernels_py
elif _requested == "compiled":
    from zolqr import _kernels as _impl  # type: ignore[no-redef]
elif _requested == "":
    try:
        from zolqr import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py
else:
    raise RuntimeError(
        f"ZOLQR_BACKEND={_requested!r} not recognized (use 'pure' or 'compiled')"
    )

BACKEND_NAME: str = _impl.BACKEND_NAME

spectral_radius = _impl.spectral_radius
solve_discrete_lyapunov = _impl.solve_discrete_lyapunov
closed_loop_cost_batch = _impl.closed_loop_cost_batch
