"""Select the compiled kernel core when available, else the pure twin.

Set EISLAB_PURE_PYTHON=1 to force the fallback (used by the benchmark and by
tests that assert both lanes agree).
"""

from __future__ import annotations

import os

if os.environ.get("EISLAB_PURE_PYTHON") == "1":
    from eislab import _kernels_py as _impl
else:
    try:
        from eislab import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from eislab import _kernels_py as _impl

BACKEND = _impl.BACKEND

matmul_mod = _impl.matmul_mod
howell_form = _impl.howell_form
reduce_rows = _impl.reduce_rows
hecke_counts = _impl.hecke_counts
hecke_image_mod = _impl.hecke_image_mod
snf_modpk_transforms = _impl.snf_modpk_transforms

# The compiled lane stores entries in int64 and forms (p^k)-sized products in
# 128-bit intermediates, so it is only sound when p^k fits well under 2^63.
INT64_MODULUS_LIMIT = 1 << 62


def supports_modulus(pk: int) -> bool:
    """Whether the selected backend can run at modulus pk."""
    if BACKEND == "python":
        return True
    return pk < INT64_MODULUS_LIMIT


def for_modulus(pk: int):
    """Return the kernel module to use for modulus pk (compiled when legal)."""
    if BACKEND != "python" and pk >= INT64_MODULUS_LIMIT:
        from eislab import _kernels_py

        return _kernels_py
    return _impl
