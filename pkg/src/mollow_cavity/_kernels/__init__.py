"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imports; set ``MOLLOW_CAVITY_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _taylor as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and not os.environ.get("MOLLOW_CAVITY_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {sorted(BACKENDS)}") from None


def taylor_trajectory(*args, backend=None):
    return get_backend(backend).taylor_trajectory(*args)
