"""Kernel backend selection.

The compiled extension is used when it imports; ``BRWMARTIN_BACKEND=python``
forces the numpy fallback.  Both backends consume random numbers identically.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available():
    return sorted(_BACKENDS)


def default_name():
    forced = os.environ.get("BRWMARTIN_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(f"backend {forced!r} requested but not available ({available()})")
        return forced
    return "cython" if _ckernels is not None else "python"


def get(name=None):
    """Kernel module for ``name`` (``None`` picks the default)."""
    if name is None:
        name = default_name()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}") from None
