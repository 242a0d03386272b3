from .topology import (
    EdgeIngressRule,
    EdgePolicy,
    FlowRule,
    HeaderTemplate,
    Injection,
    Node,
    NodeKind,
    RouteEntry,
    RoutingTable,
    RuleAction,
    Scenario,
    Topology,
    build_topology,
    load_scenario,
    parse_injections,
)
from .engine import RunResult, edge_ingress, flow_match, run
from .trace import TraceRecord, format_json, format_text

__all__ = [
    "EdgeIngressRule",
    "EdgePolicy",
    "FlowRule",
    "HeaderTemplate",
    "Injection",
    "Node",
    "NodeKind",
    "RouteEntry",
    "RoutingTable",
    "RuleAction",
    "Scenario",
    "Topology",
    "build_topology",
    "load_scenario",
    "parse_injections",
    "RunResult",
    "edge_ingress",
    "flow_match",
    "run",
    "TraceRecord",
    "format_json",
    "format_text",
]
