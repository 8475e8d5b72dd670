"""Kernel selection: the compiled extension when importable, else numpy.

Set ``CDDE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as python_kernels

compiled_kernels = None
if not os.environ.get("CDDE_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

BACKEND = "compiled" if compiled_kernels is not None else "python"
_impl = compiled_kernels or python_kernels

dp_backward = _impl.dp_backward
max_pair_quotient = _impl.max_pair_quotient
