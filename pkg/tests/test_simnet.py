"""Simulator: topology building, per-kind processing, rules, determinism."""

import copy
from ipaddress import ip_address, ip_network

import pytest

from gvn import errors
from gvn.codec import GVN_PROTOCOL, GvnHeader, push_gvn
from gvn.logics import content_tag
from gvn.packet import make_packet
from gvn.sim import build_topology, flow_match, load_scenario, run
from gvn.sim.engine import process_at_node
from gvn.sim.topology import FlowRule, RouteEntry, RoutingTable, RuleAction
from gvn.sim.trace import format_text


def three_node_doc():
    return {
        "nodes": [
            {"id": "h1", "kind": "legacy_host", "addresses": ["10.0.0.1"]},
            {"id": "r1", "kind": "legacy_router", "addresses": ["10.0.0.254"]},
            {"id": "h2", "kind": "legacy_host", "addresses": ["10.0.1.1"]},
        ],
        "links": [["h1", "r1"], ["r1", "h2"]],
        "routes": {
            "h1": [{"prefix": "0.0.0.0/0", "next_hop": "r1"}],
            "r1": [
                {"prefix": "10.0.1.0/24", "next_hop": "h2"},
                {"prefix": "10.0.0.0/24", "next_hop": "h1"},
            ],
            "h2": [{"prefix": "0.0.0.0/0", "next_hop": "r1"}],
        },
        "injections": [
            {"node": "h1", "time": 0,
             "packet": {"version": 4, "src": "10.0.0.1", "dst": "10.0.1.1",
                        "protocol": 17, "ttl": 64, "payload_hex": "cafe"}},
        ],
    }


# -- construction ---------------------------------------------------------------

def test_build_smallest_useful_graph():
    topology = build_topology(three_node_doc())
    assert set(topology.nodes) == {"h1", "r1", "h2"}
    assert topology.nodes["r1"].neighbors == ("h1", "h2")


def test_route_to_unknown_node():
    doc = three_node_doc()
    doc["routes"]["r1"].append({"prefix": "10.0.2.0/24", "next_hop": "ghost"})
    with pytest.raises(errors.DanglingReference):
        build_topology(doc)


def test_route_to_unattached_node():
    doc = three_node_doc()
    doc["routes"]["h1"].append({"prefix": "10.0.1.0/24", "next_hop": "h2"})
    with pytest.raises(errors.SchemaError):
        build_topology(doc)


def test_duplicate_node_id():
    doc = three_node_doc()
    doc["nodes"].append({"id": "h1", "kind": "legacy_host", "addresses": []})
    with pytest.raises(errors.DuplicateNodeId):
        build_topology(doc)


def test_unknown_section_rejected():
    doc = three_node_doc()
    doc["nodez"] = []
    with pytest.raises(errors.SchemaError):
        build_topology(doc)


def test_unknown_kind_rejected():
    doc = three_node_doc()
    doc["nodes"][0]["kind"] = "quantum_router"
    with pytest.raises(errors.SchemaError):
        build_topology(doc)


def test_legacy_node_cannot_hold_logics():
    doc = three_node_doc()
    doc["registries"] = {"r1": [{"pl": "vpn", "allowed": [1]}]}
    with pytest.raises(errors.SchemaError):
        build_topology(doc)


def test_link_to_unknown_node():
    doc = three_node_doc()
    doc["links"].append(["h2", "ghost"])
    with pytest.raises(errors.DanglingReference):
        build_topology(doc)


def test_chain_with_no_functions_rejected():
    doc = three_node_doc()
    doc["chains"] = [{"spi": 3, "functions": []}]
    with pytest.raises(errors.SchemaError):
        build_topology(doc)


# -- routing table ------------------------------------------------------------------

def test_longest_prefix_wins():
    table = RoutingTable([
        RouteEntry(ip_network("10.0.0.0/8"), "coarse"),
        RouteEntry(ip_network("10.1.0.0/16"), "fine"),
    ])
    assert table.lookup(ip_address("10.1.2.3")) == "fine"
    assert table.lookup(ip_address("10.2.0.1")) == "coarse"
    assert table.lookup(ip_address("192.168.0.1")) is None


def test_prefix_tie_breaks_to_lowest_next_hop():
    table = RoutingTable([
        RouteEntry(ip_network("10.0.0.0/24"), "zeta"),
        RouteEntry(ip_network("10.0.0.0/24"), "alpha"),
    ])
    assert table.lookup(ip_address("10.0.0.5")) == "alpha"


# -- run ----------------------------------------------------------------------------

def test_empty_injection_list_yields_empty_trace():
    doc = three_node_doc()
    doc["injections"] = []
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    assert result.records == []
    assert result.steps == 0


def test_three_node_trace_sequence():
    scenario = load_scenario(three_node_doc())
    result = run(scenario.topology, scenario.injections, 100)
    events = [(r.time, r.node, r.event) for r in result.records]
    assert events == [
        (0, "h1", "Ingress"), (0, "h1", "Forward"),
        (1, "r1", "Ingress"), (1, "r1", "Forward"),
        (2, "h2", "Ingress"), (2, "h2", "Deliver"),
    ]
    ttls = [r.ttl for r in result.records]
    assert ttls == [64, 64, 64, 63, 63, 63]
    assert result.delivered == 1 and result.in_flight == 0


def test_routing_loop_hits_step_limit_then_ttl():
    doc = {
        "nodes": [
            {"id": "a", "kind": "legacy_router", "addresses": ["10.0.0.1"]},
            {"id": "b", "kind": "legacy_router", "addresses": ["10.0.0.2"]},
        ],
        "links": [["a", "b"]],
        "routes": {
            "a": [{"prefix": "10.9.0.0/16", "next_hop": "b"}],
            "b": [{"prefix": "10.9.0.0/16", "next_hop": "a"}],
        },
        "injections": [
            {"node": "a", "time": 0,
             "packet": {"version": 4, "src": "10.0.0.1", "dst": "10.9.9.9",
                        "protocol": 17, "ttl": 20, "payload_hex": ""}},
        ],
    }
    scenario = load_scenario(doc)
    limited = run(scenario.topology, scenario.injections, 5)
    assert limited.step_limit_exceeded
    assert limited.in_flight == 1
    assert limited.injected == limited.delivered + sum(limited.dropped.values()) + limited.in_flight
    full = run(scenario.topology, scenario.injections, 1000)
    assert not full.step_limit_exceeded
    assert full.dropped["TtlExpired"] == 1
    assert full.records[-1].event == "Drop(TtlExpired)"


def test_ttl_one_dropped_at_router():
    doc = three_node_doc()
    doc["injections"][0]["packet"]["ttl"] = 1
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    assert result.records[-1].node == "r1"
    assert result.records[-1].event == "Drop(TtlExpired)"


def test_no_route_drop():
    doc = three_node_doc()
    doc["injections"][0]["packet"]["dst"] = "172.31.0.1"
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    # h1's default route sends it to r1, which has no matching entry
    assert result.records[-1].node == "r1"
    assert result.records[-1].event == "Drop(NoRoute)"


def test_gvn_tagged_packet_crosses_legacy_router_unchanged():
    doc = three_node_doc()
    doc["nodes"][0]["kind"] = "gvn_end_host"
    doc["nodes"][2]["kind"] = "gvn_end_host"
    doc["registries"] = {"h2": [{"pl": "vpn", "allowed": [5]}]}
    doc["injections"][0]["gvn"] = {"code": "vpn", "pl": {"kind": "vpn", "vnid": 5}}
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    assert result.delivered == 1
    node, packet = result.delivered_packets[0]
    assert node == "h2"
    injected = scenario.injections[0].packet
    # bytes from the GVN header onward are invariant across the hop
    assert packet.payload == injected.payload
    assert packet.ttl == injected.ttl - 1


def test_tagged_packet_at_legacy_host_is_discarded():
    doc = three_node_doc()
    doc["injections"][0]["gvn"] = {"code": 42, "pl": {"kind": "raw", "hex": ""}}
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    assert result.records[-1].node == "h2"
    assert result.records[-1].event == "Drop(UnknownTransport)"


def test_malformed_tag_is_diagnosed_on_ingress_and_forwarded():
    scenario = load_scenario(three_node_doc())
    packet = make_packet(4, "10.0.0.1", "10.0.1.1", 17, 64, b"\xFF" + bytes(7))
    broken = packet.with_protocol_and_payload(GVN_PROTOCOL, packet.payload)
    from gvn.sim.topology import Injection
    result = run(scenario.topology, [Injection(node="h1", time=0, packet=broken)], 100)
    ingress = [r for r in result.records if r.event == "Ingress"]
    assert all("ReservedLength" in r.diagnostic for r in ingress)
    assert result.records[-1].event == "Drop(UnknownTransport)"  # at h2


# -- flow rules -------------------------------------------------------------------

def _tagged(code=2, pl=b"", dst="10.0.1.1"):
    packet = make_packet(4, "10.0.0.1", dst, 17, 64, b"x")
    return push_gvn(packet, GvnHeader(next_header=17, code=code, pl_data=pl))


def test_flow_match_on_code():
    rule = FlowRule(priority=1, action=RuleAction(kind="deliver"), match_code=2)
    assert flow_match((rule,), _tagged(code=2)) is rule
    assert flow_match((rule,), _tagged(code=3)) is None


def test_flow_match_untagged_never_matches_code_rule():
    rule = FlowRule(priority=1, action=RuleAction(kind="deliver"), match_code=2)
    assert flow_match((rule,), make_packet(4, "1.1.1.1", "2.2.2.2", 17, 64)) is None


def test_flow_match_pl_prefix():
    tag = content_tag("video/abc")
    rule = FlowRule(priority=1, action=RuleAction(kind="deliver"),
                    match_pl_prefix=(0, tag))
    assert flow_match((rule,), _tagged(pl=tag)) is rule
    assert flow_match((rule,), _tagged(pl=content_tag("other/name"))) is None


def test_flow_match_dst_prefix():
    rule = FlowRule(priority=1, action=RuleAction(kind="deliver"),
                    match_dst_prefix=ip_network("10.0.1.0/24"))
    assert flow_match((rule,), _tagged(dst="10.0.1.9")) is rule
    assert flow_match((rule,), _tagged(dst="10.0.2.9")) is None


def test_flow_priority_brute_force():
    # All orderings of two overlapping rules: the higher priority wins, and
    # equal priorities fall back to insertion order.
    low = FlowRule(priority=1, action=RuleAction(kind="deliver"), match_code=2)
    high = FlowRule(priority=9, action=RuleAction(kind="drop"), match_code=2)
    packet = _tagged(code=2)
    for rules, expected in [
        ((low, high), high), ((high, low), high),
    ]:
        assert flow_match(rules, packet) is expected
    twin_a = FlowRule(priority=5, action=RuleAction(kind="deliver"), match_code=2)
    twin_b = FlowRule(priority=5, action=RuleAction(kind="drop"), match_code=2)
    assert flow_match((twin_a, twin_b), packet) is twin_a
    assert flow_match((twin_b, twin_a), packet) is twin_b


# -- edge behavior ------------------------------------------------------------------

def edge_doc():
    return {
        "nodes": [
            {"id": "h1", "kind": "legacy_host", "addresses": ["192.168.1.10"]},
            {"id": "e1", "kind": "gvn_edge", "addresses": ["192.168.1.1"]},
            {"id": "e2", "kind": "gvn_edge", "addresses": ["192.168.2.1"]},
            {"id": "h2", "kind": "legacy_host", "addresses": ["192.168.2.10"]},
        ],
        "links": [["h1", "e1"], ["e1", "e2"], ["e2", "h2"]],
        "routes": {
            "h1": [{"prefix": "0.0.0.0/0", "next_hop": "e1"}],
            "e1": [{"prefix": "192.168.2.0/24", "next_hop": "e2"},
                   {"prefix": "192.168.1.0/24", "next_hop": "h1"}],
            "e2": [{"prefix": "192.168.2.0/24", "next_hop": "h2"},
                   {"prefix": "192.168.1.0/24", "next_hop": "e1"}],
            "h2": [{"prefix": "0.0.0.0/0", "next_hop": "e2"}],
        },
        "edge_policies": {
            "e1": {"ingress": [{"match": {"dst_prefix": "192.168.2.0/24", "protocol": 17},
                                "action": {"push": {"code": "vpn",
                                                    "pl": {"kind": "vpn", "vnid": 7}}}}]},
            "e2": {"pop_egress": ["192.168.2.0/24"]},
        },
        "injections": [
            {"node": "h1", "time": 0,
             "packet": {"version": 4, "src": "192.168.1.10", "dst": "192.168.2.10",
                        "protocol": 17, "ttl": 32, "payload_hex": "beefcafe"}},
        ],
    }


def test_edge_push_pop_symmetry_is_byte_exact_without_routers():
    scenario = load_scenario(edge_doc())
    result = run(scenario.topology, scenario.injections, 100)
    assert result.delivered == 1
    events = [r.event for r in result.records]
    assert "Push" in events and "Pop" in events
    _, packet = result.delivered_packets[0]
    assert packet.to_bytes() == scenario.injections[0].packet.to_bytes()


def test_edge_symmetry_through_a_router_changes_only_ttl():
    doc = edge_doc()
    doc["nodes"].insert(2, {"id": "g", "kind": "legacy_router", "addresses": ["10.0.0.9"]})
    doc["links"] = [["h1", "e1"], ["e1", "g"], ["g", "e2"], ["e2", "h2"]]
    doc["routes"]["e1"] = [{"prefix": "192.168.2.0/24", "next_hop": "g"},
                           {"prefix": "192.168.1.0/24", "next_hop": "h1"}]
    doc["routes"]["g"] = [{"prefix": "192.168.2.0/24", "next_hop": "e2"},
                          {"prefix": "192.168.1.0/24", "next_hop": "e1"}]
    doc["routes"]["e2"] = [{"prefix": "192.168.2.0/24", "next_hop": "h2"},
                           {"prefix": "192.168.1.0/24", "next_hop": "g"}]
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    injected = scenario.injections[0].packet
    _, packet = result.delivered_packets[0]
    assert packet.ttl == injected.ttl - 1
    assert packet.to_bytes() == injected.with_ttl(packet.ttl).to_bytes()


def test_untagged_non_matching_traffic_passes_edge_unchanged():
    doc = edge_doc()
    doc["injections"][0]["packet"]["protocol"] = 6  # rule matches UDP only
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    events = [r.event for r in result.records]
    assert "Push" not in events
    _, packet = result.delivered_packets[0]
    assert packet.to_bytes() == scenario.injections[0].packet.to_bytes()


def test_already_tagged_traffic_passes_edge_without_restacking():
    doc = edge_doc()
    doc["injections"][0]["gvn"] = {"code": "vpn", "pl": {"kind": "vpn", "vnid": 7}}
    doc["nodes"][0]["kind"] = "gvn_end_host"  # legacy host cannot source tags
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    pushes = [r for r in result.records if r.event == "Push"]
    assert pushes == []
    # still popped at the far edge and delivered untagged
    _, packet = result.delivered_packets[0]
    assert packet.protocol == 17


# -- differential equivalence ---------------------------------------------------------

def test_bare_gvn_router_indistinguishable_from_legacy_router():
    base = three_node_doc()
    base["injections"].append(
        {"node": "h1", "time": 2,
         "packet": {"version": 4, "src": "10.0.0.1", "dst": "10.0.1.1",
                    "protocol": 17, "ttl": 9, "payload_hex": "00"},
         "gvn": {"code": 1234, "pl": {"kind": "raw", "hex": "aabbccdd"}}})
    base["injections"].append(
        {"node": "h1", "time": 3,
         "packet": {"version": 4, "src": "10.0.0.1", "dst": "10.0.0.254",
                    "protocol": 17, "ttl": 9, "payload_hex": "00"},
         "gvn": {"code": 1234, "pl": {"kind": "raw", "hex": "aabbccdd"}}})
    swapped = copy.deepcopy(base)
    swapped["nodes"][1]["kind"] = "gvn_router"
    traces = []
    for doc in (base, swapped):
        scenario = load_scenario(doc)
        result = run(scenario.topology, scenario.injections, 100)
        traces.append(format_text(result.records))
    assert traces[0] == traces[1]


# -- determinism -----------------------------------------------------------------------

def test_identical_runs_produce_identical_traces():
    doc = edge_doc()
    first = run(*_scenario_args(doc))
    second = run(*_scenario_args(doc))
    assert format_text(first.records) == format_text(second.records)


def _scenario_args(doc):
    scenario = load_scenario(copy.deepcopy(doc))
    return scenario.topology, scenario.injections, scenario.max_steps


# -- IPv6 on a single link ----------------------------------------------------------

def test_ipv6_tagged_delivery_over_one_link():
    doc = {
        "nodes": [
            {"id": "a", "kind": "gvn_end_host", "addresses": ["2001:db8::1"]},
            {"id": "b", "kind": "gvn_end_host", "addresses": ["2001:db8::2"]},
        ],
        "links": [["a", "b"]],
        "registries": {"b": [{"pl": "vpn", "allowed": [10]}]},
        "injections": [
            {"node": "a", "time": 0,
             "packet": {"version": 6, "src": "2001:db8::1", "dst": "2001:db8::2",
                        "protocol": 17, "ttl": 64, "payload_hex": "f00d"},
             "gvn": {"code": "vpn", "pl": {"kind": "vpn", "vnid": 10}}},
        ],
    }
    scenario = load_scenario(doc)
    result = run(scenario.topology, scenario.injections, 100)
    assert result.delivered == 1
    node, packet = result.delivered_packets[0]
    assert node == "b"
    assert packet.version == 6
    assert packet.ttl == 64  # no routers on the path


# -- single-node processing ------------------------------------------------------------

def test_process_at_node_single_arrival():
    topology = build_topology(three_node_doc())
    packet = make_packet(4, "10.0.0.1", "10.0.0.254", 17, 64, b"to the router")
    result = process_at_node(topology, "r1", packet)
    assert [r.event for r in result.records] == ["Ingress", "Deliver"]
