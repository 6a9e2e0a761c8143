"""Backend selection for the conv unfold/fold kernels.

The compiled extension is used when it imports; set ``SREC_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
im2col = _pykernels.im2col
col2im = _pykernels.col2im

if os.environ.get("SREC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    if _ckernels is not None:
        BACKEND = "cython"
        im2col = _ckernels.im2col
        col2im = _ckernels.col2im
