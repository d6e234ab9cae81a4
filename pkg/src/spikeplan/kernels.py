"""Backend selection for the hot sampling loops.

The compiled Cython extension is used when it imports cleanly; otherwise the
numpy fallback is used. Set ``SPIKEPLAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

try:
    if os.environ.get("SPIKEPLAN_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_impl = BACKENDS[BACKEND]

sample_batch = _impl.sample_batch
refractory_filter = _impl.refractory_filter


def get_backend(name):
    """Return the kernel module registered under ``name``."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} unavailable; have {sorted(BACKENDS)}"
        ) from None
