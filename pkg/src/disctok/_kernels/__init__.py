"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set DISCTOK_FORCE_FALLBACK=1 to skip the extension (used by the benchmark
and by tests that compare the two backends).
"""

import os

from . import fallback

BACKEND = "fallback"
_impl = fallback

if os.environ.get("DISCTOK_FORCE_FALLBACK") != "1":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass


def backend_name() -> str:
    return BACKEND


assign_tokens = _impl.assign_tokens
assign_accumulate = _impl.assign_accumulate
pack_bits = _impl.pack_bits
unpack_bits = _impl.unpack_bits
