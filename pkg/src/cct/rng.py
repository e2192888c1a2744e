"""Backend selection for the simulator kernels.

Prefers the compiled extension when it was built, falls back to the pure
Python implementation otherwise. CCT_KERNELS=py|cy forces a backend (the
benchmark and the equivalence tests use this).
"""

from __future__ import annotations

import os

_forced = os.environ.get("CCT_KERNELS")

if _forced == "py":
    from cct import _kernels_py as _impl
elif _forced == "cy":
    from cct import _kernels_cy as _impl  # type: ignore[attr-defined]
elif _forced:
    raise ImportError(f"unknown CCT_KERNELS value: {_forced!r}")
else:
    try:
        from cct import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from cct import _kernels_py as _impl

BACKEND: str = _impl.__name__.rsplit("_", 1)[-1]

splitmix_stream = _impl.splitmix_stream
xoshiro_stream = _impl.xoshiro_stream
poisson_pair_events = _impl.poisson_pair_events
