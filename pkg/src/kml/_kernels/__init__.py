"""Backend selection for the collision hot loops.

The compiled extension is used when it imports; setting ``KML_BACKEND=python``
forces the numpy fallback.  ``BACKEND`` names the active choice.
"""
import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("KML_BACKEND", "").lower() == "python" or compiled_backend is None:
    active = python_backend
    BACKEND = "python"
else:
    active = compiled_backend
    BACKEND = "compiled"

gain_accumulate = active.gain_accumulate
convolve_accumulate = active.convolve_accumulate
advect_blocks = active.advect_blocks


def get_backend(name=None):
    """Module exposing ``gain_accumulate`` and ``convolve_accumulate``."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
