"""Trace records and their canonical renderings.

The text form is one record per line, fields tab-separated in declared
order, so two runs of the same scenario can be compared byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional

from ..codec import GVN_PROTOCOL, parse_gvn
from ..errors import MalformedHeader
from ..packet import IpPacket

FIELDS = ("seq", "time", "node", "event", "src", "dst", "protocol", "code", "ttl", "diagnostic")


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    time: int
    node: str
    event: str  # Ingress | Forward | Deliver | Push | Pop | Rewrite | Drop(Reason)
    src: str
    dst: str
    protocol: int
    code: Optional[int]
    ttl: int
    diagnostic: Optional[str] = None

    def to_line(self) -> str:
        code = f"{self.code:#012x}" if self.code is not None else "-"
        diag = self.diagnostic if self.diagnostic else "-"
        return "\t".join(str(v) for v in (
            self.seq, self.time, self.node, self.event,
            self.src, self.dst, self.protocol, code, self.ttl, diag))

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FIELDS}


def summarize(packet: IpPacket) -> tuple:
    """(src, dst, protocol, code-or-None, ttl) for a trace record."""
    code = None
    if packet.protocol == GVN_PROTOCOL:
        try:
            code = parse_gvn(packet.payload).code
        except MalformedHeader:
            code = None
    return str(packet.src), str(packet.dst), packet.protocol, code, packet.ttl


def format_text(records: List[TraceRecord]) -> str:
    return "".join(record.to_line() + "\n" for record in records)


def format_json(records: List[TraceRecord]) -> str:
    return json.dumps([record.to_dict() for record in records], indent=2) + "\n"
