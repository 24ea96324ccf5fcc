"""Backend selection for the trajectory integrator.

The compiled Cython kernel is used when it was built; otherwise, or when the
environment variable ``STROBEQND_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation is used.  Both produce identical
results for identical inputs.
"""

import os

from . import _kernel_py

BACKENDS = {"python": _kernel_py.integrate}

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None
else:
    BACKENDS["cython"] = _kernel.integrate

if os.environ.get("STROBEQND_PURE_PYTHON", "0") not in ("", "0") or _kernel is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_integrator(name=None):
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
