"""Code-keyed processing-logic registry and the receive-side dispatch rules.

A processing logic (PL) is a handler bound to one 40-bit GVN code.  Dispatch
at a GVN-capable node covers the full receive matrix:

* untagged, destination elsewhere     -> forward by the IP routing table
* untagged, destination local         -> deliver, or drop an unknown transport
* tagged, code unregistered           -> drop if the header requests it,
                                         otherwise behave exactly like a
                                         node with no GVN support at all
* tagged, code registered             -> whatever the handler decides

Handlers are deterministic: the same (header, packet, node state) must map
to the same action.  A logic that needs randomness draws from the seeded
``NodeContext.rng``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Optional

from .codec import GvnHeader, classify
from .errors import DuplicateCode, ReservedCode
from .packet import KNOWN_TRANSPORTS, IPAddress, IpPacket

# Code 0 is the unset sentinel; it round-trips through the codec but can
# never be bound to a handler.
RESERVED_CODE = 0


class ActionKind(Enum):
    FORWARD_BY_IP = "ForwardByIp"
    FORWARD_TO = "ForwardTo"
    DELIVER_LOCAL = "DeliverLocal"
    DROP = "Drop"
    REWRITE_AND_FORWARD = "RewriteAndForward"


class DropReason(Enum):
    UNKNOWN_TRANSPORT = "UnknownTransport"
    UNKNOWN_CODE = "UnknownCode"
    TTL_EXPIRED = "TtlExpired"
    NO_ROUTE = "NoRoute"
    VPN_VIOLATION = "VpnViolation"
    UNKNOWN_SPI = "UnknownSpi"
    SI_MISMATCH = "SiMismatch"
    MALFORMED_PL = "MalformedPl"
    POLICY = "Policy"


@dataclass(frozen=True)
class PlAction:
    """One decision about a packet's fate at a node.

    ``next_hop`` names a neighbor for FORWARD_TO; ``packet`` carries the
    rewritten datagram for REWRITE_AND_FORWARD (routed by IP unless
    ``next_hop`` is also given).  ``note`` is free-form text copied into the
    trace for observability.
    """

    kind: ActionKind
    next_hop: Optional[str] = None
    reason: Optional[DropReason] = None
    packet: Optional[IpPacket] = None
    note: Optional[str] = None

    @staticmethod
    def forward_by_ip(note: str | None = None) -> "PlAction":
        return PlAction(ActionKind.FORWARD_BY_IP, note=note)

    @staticmethod
    def forward_to(next_hop: str, note: str | None = None) -> "PlAction":
        return PlAction(ActionKind.FORWARD_TO, next_hop=next_hop, note=note)

    @staticmethod
    def deliver(note: str | None = None) -> "PlAction":
        return PlAction(ActionKind.DELIVER_LOCAL, note=note)

    @staticmethod
    def drop(reason: DropReason, note: str | None = None) -> "PlAction":
        return PlAction(ActionKind.DROP, reason=reason, note=note)

    @staticmethod
    def rewrite_and_forward(packet: IpPacket, next_hop: str | None = None,
                            note: str | None = None) -> "PlAction":
        return PlAction(ActionKind.REWRITE_AND_FORWARD, packet=packet,
                        next_hop=next_hop, note=note)


PlHandler = Callable[[GvnHeader, IpPacket, "NodeContext"], PlAction]


@dataclass(frozen=True)
class ProcessingLogicBinding:
    code: int
    name: str
    handler: PlHandler


@dataclass
class NodeContext:
    """What a handler may see of the node it runs on.

    ``pl_state`` is per-node mutable storage keyed by GVN code, confined to
    the node's own event processing.  ``routing_view`` is read access to the
    node's routing table (an object with a ``lookup(dst)`` method) and may
    be None outside the simulator.
    """

    node_id: str
    local_addresses: FrozenSet[IPAddress] = frozenset()
    routing_view: object = None
    pl_state: Dict[int, dict] = field(default_factory=dict)
    rng: random.Random = field(default_factory=lambda: random.Random(0))


class PlRegistry:
    """Per-node mapping of GVN codes to processing logics.

    Populated while a topology is built and treated as read-only afterwards,
    so concurrent dispatch needs no locking.
    """

    def __init__(self) -> None:
        self._bindings: Dict[int, ProcessingLogicBinding] = {}

    def register(self, binding: ProcessingLogicBinding) -> "PlRegistry":
        if binding.code == RESERVED_CODE:
            raise ReservedCode("code 0 is reserved and cannot be bound")
        if binding.code in self._bindings:
            raise DuplicateCode(f"code {binding.code:#012x} already bound "
                                f"to {self._bindings[binding.code].name!r}")
        self._bindings[binding.code] = binding
        return self

    def lookup(self, code: int) -> Optional[ProcessingLogicBinding]:
        return self._bindings.get(code)

    def __len__(self) -> int:
        return len(self._bindings)

    def dispatch(self, packet: IpPacket, ctx: NodeContext) -> PlAction:
        """Decide a packet's fate at a GVN-capable node."""
        cls = classify(packet)
        if cls.is_gvn:
            binding = self.lookup(cls.header.code)
            if binding is not None:
                return binding.handler(cls.header, packet, ctx)
            if cls.header.drop_on_unknown:
                return PlAction.drop(DropReason.UNKNOWN_CODE,
                                     note=f"code {cls.header.code:#012x} not registered")
            # Unknown code, no drop hint: fall through to plain IP handling,
            # where protocol 254 reads as an unknown transport.
        return ip_level_action(packet, ctx.local_addresses)


def ip_level_action(packet: IpPacket, local_addresses: FrozenSet[IPAddress]) -> PlAction:
    """Plain IP treatment of a packet, GVN support or not.

    This is also the behavior of a legacy node, so an empty registry with
    clear flags is observationally identical to no GVN support.  Parse
    diagnostics for malformed tagged packets are surfaced on ingress trace
    records, never here, to keep that equivalence exact.
    """
    if packet.dst not in local_addresses:
        return PlAction.forward_by_ip()
    if packet.protocol in KNOWN_TRANSPORTS:
        return PlAction.deliver()
    return PlAction.drop(DropReason.UNKNOWN_TRANSPORT,
                         note=f"protocol {packet.protocol} has no handler")


def legacy_action(packet: IpPacket, local_addresses: FrozenSet[IPAddress]) -> PlAction:
    """Receive behavior of a node with no GVN support at all."""
    return ip_level_action(packet, local_addresses)
