"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module is. Setting ``QPSTAB_PURE_PYTHON=1`` forces
the fallback.
"""

import os

from . import _pykernels

STATUS_OK = _pykernels.STATUS_OK
STATUS_UNDERFLOW = _pykernels.STATUS_UNDERFLOW
STATUS_NONFINITE = _pykernels.STATUS_NONFINITE
STATUS_MAX_STEPS = _pykernels.STATUS_MAX_STEPS

# vectorized numpy already; no compiled twin needed
dense_eval = _pykernels.dense_eval

_compiled = None
if os.environ.get("QPSTAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
_active = BACKENDS[BACKEND]


def get_backend(name=None):
    """Kernel module by name; ``None`` means the active backend."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def dopri5_log(*args, backend=None):
    return get_backend(backend).dopri5_log(*args)
