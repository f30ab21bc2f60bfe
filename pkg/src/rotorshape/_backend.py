"""Select the propagation backend at import time.

The compiled Cython kernels are preferred; the NumPy implementation is a
drop-in replacement.  ``ROTORSHAPE_BACKEND`` forces the choice
("compiled" or "python").
"""

import os

_requested = os.environ.get("ROTORSHAPE_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "python"):
    raise ImportError(
        f"ROTORSHAPE_BACKEND={_requested!r} not understood "
        "(use 'compiled' or 'python')")

if _requested == "python":
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl
        BACKEND = "python"

strang_evolve = _impl.strang_evolve
strang_evolve_expect = _impl.strang_evolve_expect
strang_evolve_record = _impl.strang_evolve_record
grape_backward = _impl.grape_backward
