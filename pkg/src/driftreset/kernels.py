"""Backend selection for the per-batch kernels.

The compiled extension is used when it imports; set ``DRIFTRESET_PURE=1``
to force the numpy fallback.
"""

import os

from driftreset import _pykernels

if os.environ.get("DRIFTRESET_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from driftreset import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

batch_forward = _impl.batch_forward
entropy_grad = _impl.entropy_grad

__all__ = ["BACKEND", "batch_forward", "entropy_grad"]
