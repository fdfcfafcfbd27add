"""Kernel backend selection.

The compiled extension is preferred when it imports; the numpy reference
implementation is the fallback.  Set MVSDE_KERNELS=reference|compiled to
force a backend (useful for the equivalence tests and the benchmark).
"""

import os

from . import reference

try:
    from . import _core as compiled
except ImportError:
    compiled = None


def available_backends():
    backends = {"reference": reference}
    if compiled is not None:
        backends["compiled"] = compiled
    return backends


_forced = os.environ.get("MVSDE_KERNELS", "").strip().lower()
if _forced == "reference":
    _impl = reference
    BACKEND = "reference"
elif _forced == "compiled":
    if compiled is None:
        raise ImportError("MVSDE_KERNELS=compiled but the extension is not built")
    _impl = compiled
    BACKEND = "compiled"
elif compiled is not None:
    _impl = compiled
    BACKEND = "compiled"
else:
    _impl = reference
    BACKEND = "reference"

philox_bits = _impl.philox_bits
fused_euler_update = _impl.fused_euler_update
milstein_lambda = _impl.milstein_lambda
