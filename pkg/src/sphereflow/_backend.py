"""Select the kernel implementation at import time.

The compiled ``_ckernels`` module is used when it imports; setting
``SPHEREFLOW_BACKEND=python`` forces the numpy fallback.
"""

import os

from . import _pykernels

_choice = os.environ.get("SPHEREFLOW_BACKEND", "auto").lower()

kernels = _pykernels
BACKEND = "python"
if _choice != "python":
    try:
        from . import _ckernels as kernels  # noqa: F811

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        kernels = _pykernels
        BACKEND = "python"

OK, POSITIVITY_FAILURE, STEP_BUDGET = 0, 1, 2


def get_kernels(name=None):
    """Return a kernel module by name (``"python"`` or ``"compiled"``)."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
