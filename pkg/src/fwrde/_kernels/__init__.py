"""Hot-kernel backend selection.

Imports the compiled extension when it is available, otherwise the pure
numpy/heapq fallback.  Set ``FWRDE_PURE_PYTHON=1`` to force the fallback.
``BACKEND`` reports which implementation is active.
"""

import os

if os.environ.get("FWRDE_PURE_PYTHON"):
    from . import _pyfallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pyfallback as _impl

BACKEND = _impl.BACKEND
hungarian = _impl.hungarian
top_k_abs = _impl.top_k_abs
most_negative_k = _impl.most_negative_k
relu_moments = _impl.relu_moments
relu_moment_partials = _impl.relu_moment_partials

__all__ = [
    "BACKEND",
    "hungarian",
    "top_k_abs",
    "most_negative_k",
    "relu_moments",
    "relu_moment_partials",
]
