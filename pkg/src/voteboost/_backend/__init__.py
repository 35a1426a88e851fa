"""Kernel backend selection.

Two interchangeable implementations of the hot tree kernels exist: _ctree
(Cython) and _pytree (pure Python). They are semantically identical down to
the bit level; the compiled one is just faster. Selection happens once at
import:

- VOTEBOOST_BACKEND=compiled forces the compiled kernels (ImportError if the
  extension is missing),
- VOTEBOOST_BACKEND=python forces the pure fallback,
- unset: compiled when available, else pure.
"""

import os

from . import _pytree

_choice = os.environ.get("VOTEBOOST_BACKEND", "").strip().lower()
if _choice not in ("", "compiled", "python"):
    raise ImportError(
        f"VOTEBOOST_BACKEND must be 'compiled' or 'python', got {_choice!r}"
    )

if _choice == "python":
    _impl = _pytree
else:
    try:
        from . import _ctree as _impl
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _pytree

BACKEND_NAME = _impl.BACKEND_NAME
grow_tree = _impl.grow_tree
best_stump = _impl.best_stump
predict_tree = _impl.predict_tree
