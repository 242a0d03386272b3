"""Deterministic discrete-event execution over a topology.

Links have unit delay and per-direction FIFO order; simultaneous events are
ordered by (time, lane, enqueue sequence), so a run is a pure function of
(topology, injections, seed) and two executions yield identical traces.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..codec import GVN_PROTOCOL, classify, pop_gvn, push_gvn
from ..framework import (
    ActionKind,
    DropReason,
    NodeContext,
    PlAction,
    legacy_action,
)
from ..logics import nfv_encap
from ..packet import KNOWN_TRANSPORTS, IpPacket
from .topology import FlowRule, Injection, Node, NodeKind, Topology
from .trace import TraceRecord, summarize

# Lane name for locally injected packets; sorts ahead of link lanes.
_INJECT_LANE = "!inject"


@dataclass
class RunResult:
    records: List[TraceRecord]
    steps: int
    step_limit_exceeded: bool
    injected: int
    delivered: int
    dropped: Counter = field(default_factory=Counter)
    in_flight: int = 0
    delivered_packets: List[Tuple[str, IpPacket]] = field(default_factory=list)


def flow_match(rules: Tuple[FlowRule, ...], packet: IpPacket) -> Optional[FlowRule]:
    """Highest-priority rule whose every present field matches; insertion
    order breaks priority ties."""
    cls = classify(packet)
    best: Optional[Tuple[int, int, FlowRule]] = None
    for index, rule in enumerate(rules):
        if rule.match_code is not None:
            if not cls.is_gvn or cls.header.code != rule.match_code:
                continue
        if rule.match_pl_prefix is not None:
            if not cls.is_gvn:
                continue
            offset, expected = rule.match_pl_prefix
            if cls.header.pl_data[offset:offset + len(expected)] != expected:
                continue
        if rule.match_dst_prefix is not None:
            if packet.dst.version != rule.match_dst_prefix.version:
                continue
            if packet.dst not in rule.match_dst_prefix:
                continue
        key = (-rule.priority, index)
        if best is None or key < (best[0], best[1]):
            best = (-rule.priority, index, rule)
    return best[2] if best else None


def edge_ingress(node: Node, packet: IpPacket, chains) -> Tuple[IpPacket, Optional[str]]:
    """Apply the edge node's ingress tagging policy to an untagged packet.

    Returns the (possibly tagged) packet and a note describing what was
    pushed, or (packet, None) when nothing matched.  Tagged packets pass
    through unchanged.
    """
    if packet.protocol == GVN_PROTOCOL or node.edge_policy is None:
        return packet, None
    for rule in node.edge_policy.ingress:
        if not rule.matches(packet):
            continue
        if rule.template is not None:
            tagged = push_gvn(packet, rule.template.build(packet))
            return tagged, f"code={rule.template.code:#012x}"
        chain = chains[rule.encap_spi]
        tagged = nfv_encap(packet, chain)
        return tagged, f"encap spi={chain.spi} si={len(chain.functions)} dst={tagged.dst}"
    return packet, None


class _Sim:
    def __init__(self, topology: Topology, seed: int) -> None:
        self.topology = topology
        self.records: List[TraceRecord] = []
        self.dropped: Counter = Counter()
        self.delivered: List[Tuple[str, IpPacket]] = []
        self._seq = 0
        self._eseq = 0
        self._heap: List[Tuple[int, str, int, str, IpPacket]] = []
        self.contexts: Dict[str, NodeContext] = {
            node_id: NodeContext(
                node_id=node_id,
                local_addresses=node.addresses,
                routing_view=node.routing,
                rng=random.Random(f"{seed}:{node_id}"),
            )
            for node_id, node in topology.nodes.items()
        }

    # -- bookkeeping -----------------------------------------------------

    def _record(self, time: int, node: str, event: str, packet: IpPacket,
                diag: Optional[str] = None) -> None:
        src, dst, proto, code, ttl = summarize(packet)
        self.records.append(TraceRecord(
            seq=self._seq, time=time, node=node, event=event,
            src=src, dst=dst, protocol=proto, code=code, ttl=ttl,
            diagnostic=diag))
        self._seq += 1

    def _schedule(self, time: int, lane: str, node_id: str, packet: IpPacket) -> None:
        heapq.heappush(self._heap, (time, lane, self._eseq, node_id, packet))
        self._eseq += 1

    # -- per-node processing ----------------------------------------------

    def _arrive(self, time: int, node: Node, packet: IpPacket) -> None:
        cls = classify(packet)
        self._record(time, node.id, "Ingress", packet, diag=cls.diagnostic)
        if node.kind in (NodeKind.LEGACY_HOST, NodeKind.LEGACY_ROUTER):
            self._resolve(time, node, packet, legacy_action(packet, node.addresses))
            return
        if node.kind is NodeKind.GVN_EDGE:
            packet, note = edge_ingress(node, packet, self.topology.chains)
            if note is not None:
                self._record(time, node.id, "Push", packet, diag=note)
        rule = flow_match(node.flow_rules, packet)
        if rule is not None:
            self._apply_rule(time, node, packet, rule)
            return
        action = node.registry.dispatch(packet, self.contexts[node.id])
        self._resolve(time, node, packet, action)

    def _apply_rule(self, time: int, node: Node, packet: IpPacket, rule: FlowRule) -> None:
        action = rule.action
        if action.kind == "forward_to":
            self._resolve(time, node, packet, PlAction.forward_to(action.next_hop))
        elif action.kind == "forward_by_ip":
            self._resolve(time, node, packet, PlAction.forward_by_ip())
        elif action.kind == "deliver":
            self._resolve(time, node, packet, PlAction.deliver(note="flow rule"))
        elif action.kind == "drop":
            self._resolve(time, node, packet,
                          PlAction.drop(action.reason, note="flow rule"))
        elif action.kind == "push":
            if packet.protocol != GVN_PROTOCOL:
                packet = push_gvn(packet, action.header.build(packet))
                self._record(time, node.id, "Push", packet,
                             diag=f"flow rule code={action.header.code:#012x}")
            self._resolve(time, node, packet, PlAction.forward_by_ip())
        elif action.kind == "pop":
            if packet.protocol == GVN_PROTOCOL and classify(packet).is_gvn:
                packet, _header = pop_gvn(packet)
                self._record(time, node.id, "Pop", packet, diag="flow rule")
            self._resolve(time, node, packet, PlAction.forward_by_ip())

    # -- action resolution --------------------------------------------------

    def _resolve(self, time: int, node: Node, packet: IpPacket, action: PlAction) -> None:
        if action.kind is ActionKind.DROP:
            self._drop(time, node, packet, action.reason, action.note)
        elif action.kind is ActionKind.DELIVER_LOCAL:
            self._deliver(time, node, packet, action.note)
        elif action.kind is ActionKind.REWRITE_AND_FORWARD:
            rewritten = action.packet
            self._record(time, node.id, "Rewrite", rewritten, diag=action.note)
            if action.next_hop is not None:
                self._forward_to(time, node, rewritten, action.next_hop)
            else:
                self._forward_by_ip(time, node, rewritten)
        elif action.kind is ActionKind.FORWARD_TO:
            self._forward_to(time, node, packet, action.next_hop)
        elif action.kind is ActionKind.FORWARD_BY_IP:
            self._forward_by_ip(time, node, packet)

    def _drop(self, time: int, node: Node, packet: IpPacket,
              reason: DropReason, note: Optional[str] = None) -> None:
        self.dropped[reason.value] += 1
        self._record(time, node.id, f"Drop({reason.value})", packet, diag=note)

    def _deliver(self, time: int, node: Node, packet: IpPacket,
                 note: Optional[str] = None) -> None:
        self.delivered.append((node.id, packet))
        self._record(time, node.id, "Deliver", packet, diag=note)

    def _forward_by_ip(self, time: int, node: Node, packet: IpPacket) -> None:
        if packet.dst in node.addresses:
            # A GVN-capable stack consumes its own well-formed tagged
            # packets; anything else follows ordinary transport handling.
            if packet.protocol in KNOWN_TRANSPORTS:
                self._deliver(time, node, packet)
            elif (packet.protocol == GVN_PROTOCOL and node.is_gvn
                  and classify(packet).is_gvn):
                self._deliver(time, node, packet)
            else:
                self._drop(time, node, packet, DropReason.UNKNOWN_TRANSPORT,
                           note=f"protocol {packet.protocol} has no handler")
            return
        next_hop = node.routing.lookup(packet.dst)
        if next_hop is None and len(node.routing) == 0:
            # Routeless nodes (single-link setups) reach directly attached
            # neighbors that own the destination address.
            for neighbor in node.neighbors:
                if packet.dst in self.topology.nodes[neighbor].addresses:
                    next_hop = neighbor
                    break
        if next_hop is None:
            self._drop(time, node, packet, DropReason.NO_ROUTE,
                       note=f"no route to {packet.dst}")
            return
        self._emit(time, node, next_hop, packet)

    def _forward_to(self, time: int, node: Node, packet: IpPacket, next_hop: str) -> None:
        if next_hop not in node.neighbors:
            self._drop(time, node, packet, DropReason.NO_ROUTE,
                       note=f"no link to {next_hop}")
            return
        self._emit(time, node, next_hop, packet)

    def _emit(self, time: int, node: Node, next_hop: str, packet: IpPacket) -> None:
        if node.decrements_ttl:
            if packet.ttl <= 1:
                self._drop(time, node, packet, DropReason.TTL_EXPIRED)
                return
            packet = packet.with_ttl(packet.ttl - 1)
        if (node.kind is NodeKind.GVN_EDGE and node.edge_policy is not None
                and packet.protocol == GVN_PROTOCOL
                and node.edge_policy.should_pop(packet.dst)
                and classify(packet).is_gvn):
            packet, header = pop_gvn(packet)
            self._record(time, node.id, "Pop", packet,
                         diag=f"code={header.code:#012x}")
        self._record(time, node.id, "Forward", packet, diag=f"to={next_hop}")
        self._schedule(time + 1, f"{node.id}>{next_hop}", next_hop, packet)

    # -- main loop ----------------------------------------------------------

    def run(self, injections: List[Injection], max_steps: int) -> RunResult:
        for injection in injections:
            self._schedule(injection.time, _INJECT_LANE, injection.node, injection.packet)
        exceeded = False
        last_time = -1
        while self._heap:
            time, _lane, _eseq, node_id, packet = self._heap[0]
            if time >= max_steps:
                exceeded = True
                break
            heapq.heappop(self._heap)
            last_time = time
            self._arrive(time, self.topology.nodes[node_id], packet)
        return RunResult(
            records=self.records,
            steps=max_steps if exceeded else last_time + 1,
            step_limit_exceeded=exceeded,
            injected=len(injections),
            delivered=len(self.delivered),
            dropped=self.dropped,
            in_flight=len(self._heap),
            delivered_packets=self.delivered,
        )


def run(topology: Topology, injections: List[Injection], max_steps: int,
        seed: int = 0) -> RunResult:
    """Execute injections over the topology until quiescence or the step
    limit; returns the complete trace and accounting."""
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    return _Sim(topology, seed).run(injections, max_steps)


def process_at_node(topology: Topology, node_id: str, packet: IpPacket,
                    seed: int = 0) -> RunResult:
    """Process a single packet arrival at one node (no further hops run)."""
    sim = _Sim(topology, seed)
    sim._arrive(0, topology.nodes[node_id], packet)
    return RunResult(
        records=sim.records, steps=1, step_limit_exceeded=False,
        injected=1, delivered=len(sim.delivered), dropped=sim.dropped,
        in_flight=len(sim._heap), delivered_packets=sim.delivered)
