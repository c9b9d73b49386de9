"""Backend selection for the convolution/pooling hot loops.

The compiled extension is used when importable; set ``SHAPEBIAS_KERNELS=python``
to force the numpy fallback.
"""

import os

from . import _kernels_py

python_backend = _kernels_py
compiled_backend = None

if os.environ.get("SHAPEBIAS_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "python"

im2col3x3 = _active.im2col3x3
col2im3x3 = _active.col2im3x3
maxpool2x2 = _active.maxpool2x2
maxpool2x2_backward = _active.maxpool2x2_backward
