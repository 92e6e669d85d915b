"""Backend selection for the hot kernels.

The compiled extension is preferred when present; the pure-numpy fallback has
identical semantics. Set STRUCTURED_OMD_BACKEND=python or =compiled to force
a choice (forcing "compiled" raises if the extension is not built).
"""

import os

from . import _pykernels

_forced = os.environ.get("STRUCTURED_OMD_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _pykernels
elif _forced == "compiled":
    from . import _ckernels as _impl
elif _forced == "":
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
else:
    raise RuntimeError(
        "STRUCTURED_OMD_BACKEND must be 'python' or 'compiled', got %r" % _forced
    )

BACKEND = _impl.BACKEND_NAME

simplex_project = _impl.simplex_project
qnorm_sq_value_grad = _impl.qnorm_sq_value_grad
prox_pgd = _impl.prox_pgd

__all__ = ["BACKEND", "simplex_project", "qnorm_sq_value_grad", "prox_pgd"]
