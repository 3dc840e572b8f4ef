"""Backend selection for the hot loops.

The compiled ``_native`` extension is used when it was built; otherwise the
numpy ``_fallback`` is used.  Set ``INFONET_BACKEND=python`` to force the
fallback (for benchmarking or debugging).
"""
import os

from . import _fallback

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

_KERNELS = ("bearing_rows", "fov_p1", "bearing_table", "fov_table", "mi_rows", "adam_update")


def available_backends():
    names = ["python"]
    if _native is not None:
        names.insert(0, "native")
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` ('native' or 'python')."""
    if name is None:
        name = os.environ.get("INFONET_BACKEND", "native")
    if name == "native" and _native is not None:
        return _native
    if name in ("python", "native"):
        return _fallback
    raise ValueError(f"unknown backend {name!r}")


backend = get_backend()
BACKEND_NAME = "native" if backend is _native else "python"

bearing_rows = backend.bearing_rows
fov_p1 = backend.fov_p1
bearing_table = backend.bearing_table
fov_table = backend.fov_table
mi_rows = backend.mi_rows
adam_update = backend.adam_update
