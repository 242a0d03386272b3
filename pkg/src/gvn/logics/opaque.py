"""Wrapping third-party service-layer headers as opaque GVN payload.

One experimental IP protocol number plus the 40-bit code space is enough to
carry any number of foreign layer-3.5 header formats; their bytes ride in
the PL data field unparsed, zero-padded to the 4-octet granularity.
"""

from __future__ import annotations

from ..codec import MAX_PL_DATA, GvnHeader
from ..errors import Oversize
from .codes import OPAQUE_DEMO_CODE


def wrap_opaque(payload: bytes, *, next_header: int = 17,
                code: int | None = None, flags: int = 0) -> GvnHeader:
    """Build a header carrying ``payload`` verbatim plus trailing zero pad."""
    if len(payload) > MAX_PL_DATA:
        raise Oversize(f"payload of {len(payload)} exceeds {MAX_PL_DATA} data bytes")
    pad = (-len(payload)) % 4
    return GvnHeader(next_header=next_header,
                     code=OPAQUE_DEMO_CODE if code is None else code,
                     flags=flags, pl_data=payload + bytes(pad))
