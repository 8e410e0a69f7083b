"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise
the numpy fallback is used. ``SYNGEN_BACKEND=python`` or
``SYNGEN_BACKEND=compiled`` forces a choice (the latter raises if the
extension is missing). Both backends expose identical functions; see
``benchmarks/bench_kernels.py`` for a head-to-head timing.
"""

import os

from . import _kernels_py

_requested = os.environ.get("SYNGEN_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _kernels_py
elif _requested == "compiled":
    from . import _ckernels as kernels
elif _requested == "":
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _kernels_py
else:
    raise ValueError(
        f"SYNGEN_BACKEND={_requested!r}: expected 'python' or 'compiled'"
    )

BACKEND_NAME = kernels.NAME
