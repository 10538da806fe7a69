"""Hot kernels: Philox normals, Euler GBM with tangent, nested inner paths.

The compiled module is used when it was built; otherwise the numpy fallback.
Set ``AADMC_BACKEND=numpy`` to force the fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("AADMC_BACKEND", "").lower() != "numpy":
    _impl = _ckernels
else:
    _impl = _pykernels

BACKEND = _impl.BACKEND
philox4x64 = _impl.philox4x64
uniforms = _impl.uniforms
normals = _impl.normals
euler_gbm = _impl.euler_gbm
inner_terminal = _impl.inner_terminal


def available_backends():
    """Map backend name to kernel module for every backend importable here."""
    out = {"numpy": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
