"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``CDFCHAOS_PURE_PYTHON=1`` is set, the numpy fallback is
used. ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _fallback

fallback = _fallback

if os.environ.get("CDFCHAOS_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else _fallback
BACKEND = active.BACKEND

rank_order = active.rank_order
rank_step = active.rank_step
pde_step = active.pde_step
pde_run = active.pde_run
sturm_count = active.sturm_count
bisect_smallest = active.bisect_smallest
bisect_smallest_many = active.bisect_smallest_many
