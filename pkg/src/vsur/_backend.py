"""Pick the compiled orthant kernels when available, else the numpy ones.

Set ``VSUR_PURE_PYTHON=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("VSUR_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import bvn_upper, genz_integrate
else:
    try:
        from ._ckernels import bvn_upper, genz_integrate

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import bvn_upper, genz_integrate

__all__ = ["BACKEND", "bvn_upper", "genz_integrate"]
