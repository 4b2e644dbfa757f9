"""Kernel backend selection.

The matching hot path (pattern unification, binding joins, constraint
programs, window aggregation) exists twice: a Cython extension and a
pure-Python twin. The compiled backend is used when it imported
successfully, unless EDGECEP_PURE=1 forces the fallback. ``activate``
switches at runtime; the engine resolves the functions through this
module on every call, so switching affects live engines (used by the
backend-comparison benchmark).
"""

from __future__ import annotations

import os

from . import pykernels
from .compile import (
    AGG_CODES, CMP_CODES, compile_constraints, compile_pattern,
)

_BACKENDS = {"python": pykernels}
try:
    from . import _ckernels
    _BACKENDS["cython"] = _ckernels
except ImportError:
    _ckernels = None

ACTIVE = "python"
match_event = pykernels.match_event
merge_bindings = pykernels.merge_bindings
eval_constraints = pykernels.eval_constraints
fold_agg = pykernels.fold_agg
scan_pairs = pykernels.scan_pairs


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def activate(name: str) -> str:
    """Select a backend by name ('python', 'cython', or 'auto')."""
    global ACTIVE, match_event, merge_bindings, eval_constraints, \
        fold_agg, scan_pairs
    if name == "auto":
        name = "cython" if "cython" in _BACKENDS else "python"
    backend = _BACKENDS.get(name)
    if backend is None:
        raise ValueError(
            f"kernel backend {name!r} unavailable (have: "
            f"{', '.join(available_backends())})")
    ACTIVE = name
    match_event = backend.match_event
    merge_bindings = backend.merge_bindings
    eval_constraints = backend.eval_constraints
    fold_agg = backend.fold_agg
    scan_pairs = backend.scan_pairs
    return name


activate("python" if os.environ.get("EDGECEP_PURE") else "auto")
