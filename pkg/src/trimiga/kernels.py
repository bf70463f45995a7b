"""Kernel dispatch: compiled Cython core when built, numpy fallback otherwise.

Set ``TRIMIGA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if not os.environ.get("TRIMIGA_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

find_spans = _impl.find_spans
basis_ders = _impl.basis_ders
accumulate_system = _impl.accumulate_system
