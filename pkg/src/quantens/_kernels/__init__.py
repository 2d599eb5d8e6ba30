"""Numerical kernels for the online-learning hot loop.

A compiled Cython extension (``_core``) is preferred; a pure-numpy fallback
(``_python``) with identical semantics is selected when the extension is not
built. Set ``QUANTENS_KERNELS=python`` (or ``cython``) to force a backend.
"""

import os

_forced = os.environ.get("QUANTENS_KERNELS", "").strip().lower()
if _forced == "python":
    from . import _python as _impl

    BACKEND = "python"
elif _forced in ("cython", "compiled"):
    from . import _core as _impl  # type: ignore[attr-defined]

    BACKEND = "cython"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _python as _impl

        BACKEND = "python"

crps_rows = _impl.crps_rows
boa_day_update = _impl.boa_day_update
weights_from_regret = _impl.weights_from_regret

__all__ = ["BACKEND", "crps_rows", "boa_day_update", "weights_from_regret"]
