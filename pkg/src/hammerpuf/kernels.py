"""Backend selection for the per-cell kernels.

The compiled extension is preferred; set ``HAMMERPUF_BACKEND=python`` to force
the numpy fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def _select():
    requested = os.environ.get("HAMMERPUF_BACKEND", "").strip().lower()
    if requested in BACKENDS:
        return requested
    return "compiled" if "compiled" in BACKENDS else "python"


BACKEND = _select()
_impl = BACKENDS[BACKEND]


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def uniform_field(row_keys, row_bits):
    return _impl.uniform_field(row_keys, row_bits)


def normal_field(row_keys, row_bits, mean, sd):
    return _impl.normal_field(row_keys, row_bits, float(mean), float(sd))


def flip_kernel(row_keys, row_bits, retention_log, hammer_rate, charged,
                noise_sd, temp_factor, inv_time):
    return _impl.flip_kernel(row_keys, row_bits, retention_log, hammer_rate,
                             charged, float(noise_sd), float(temp_factor),
                             float(inv_time))
