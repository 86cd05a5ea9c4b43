"""Backend selection for the per-pulse kernels.

The compiled extension is used when it imports; set ``HDQKD_PURE_PYTHON=1``
to force the NumPy fallback. Both produce identical integer tallies.
"""

import os

from . import _kernels_py

if os.environ.get("HDQKD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
classify_eve = _impl.classify_eve
orthant_tally = _impl.orthant_tally
score_bob = _impl.score_bob
