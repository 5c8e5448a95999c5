"""Element-kernel backend selection.

The compiled Cython core is used when it imported successfully and the
environment variable FOSLL_PURE_PYTHON is not set; otherwise the numpy
fallback is used. Both expose the same `element_blocks` signature.
"""

import os

from . import fallback
from .fallback import FORM_EXPANDED, FORM_FACTORED, FORM_GRAM

if os.environ.get("FOSLL_PURE_PYTHON"):
    _impl = fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = fallback

BACKEND = _impl.BACKEND
element_blocks = _impl.element_blocks

__all__ = ["BACKEND", "FORM_EXPANDED", "FORM_FACTORED", "FORM_GRAM",
           "element_blocks", "fallback"]
