import logging
import math
from collections import defaultdict
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx

from errors import MalformedMappingError
from model import (CompleteMapping, DataflowDag, DataflowPath, FeasibilityReport, NodeId,
                   ResourceGraph, Violation)

logger = logging.getLogger(__name__)


class ConstrainedPath(NamedTuple):
    nodes: Tuple[NodeId, ...]
    latency: float


def _hops(route):
    """Consecutive node pairs of a route; (v, v) pairs are zero-length and skipped"""
    for a, b in zip(route, route[1:]):
        if a != b:
            yield a, b


def _check_route(graph, route, head, tail, bw_req, label, violations):
    """Continuity and bandwidth checks for one routed dataflow edge.

    Returns the traversed links, or None when the route is broken.
    """
    if not route:
        violations.append(Violation('continuity', f"{label}: empty route"))
        return None
    broken = False
    if route[0] != head:
        violations.append(Violation('continuity', f"{label}: route starts at {route[0]}, tail vertex is on {head}"))
        broken = True
    if route[-1] != tail:
        violations.append(Violation('continuity', f"{label}: route ends at {route[-1]}, head vertex is on {tail}"))
        broken = True

    links = []
    for a, b in _hops(route):
        link = graph.link(a, b) if a in graph and b in graph else None
        if link is None:
            violations.append(Violation('continuity', f"{label}: no link {a}-{b}"))
            broken = True
            continue
        links.append(link)
    if broken:
        return None

    if links:
        narrowest = min(links, key=lambda link: link.bandwidth)
        if bw_req > narrowest.bandwidth:
            violations.append(Violation(
                'bandwidth',
                f"{label}: requires {bw_req}, link {narrowest.u}-{narrowest.v} offers {narrowest.bandwidth}",
            ))
    return links


def _check_capacity(graph, placement: Mapping[NodeId, List[float]], violations):
    for node in sorted(placement):
        if node not in graph:
            continue
        used = math.fsum(placement[node])
        if used > graph.capacity(node):
            violations.append(Violation('capacity', f"node {node}: requires {used}, offers {graph.capacity(node)}"))


def verify_path_mapping(graph: ResourceGraph, path: DataflowPath, mapping: CompleteMapping) -> FeasibilityReport:
    """Check pins, per-node capacity, per-edge bandwidth and route continuity"""
    violations = []
    p = path.p

    if len(mapping.vertex_map) != p:
        violations.append(Violation('structure', f"vertex map has {len(mapping.vertex_map)} entries, pipeline has {p}"))
    if len(mapping.edge_map) != p - 1:
        violations.append(Violation('structure', f"edge map has {len(mapping.edge_map)} entries, pipeline has {p - 1} edges"))
    unknown = sorted({node for node in mapping.vertex_map if node not in graph})
    for node in unknown:
        violations.append(Violation('structure', f"vertex map uses unknown node {node}"))
    if violations:
        return FeasibilityReport(tuple(violations))

    if mapping.vertex_map[0] != path.source_pin:
        violations.append(Violation('pin', f"source mapped to {mapping.vertex_map[0]}, pinned to {path.source_pin}"))
    if mapping.vertex_map[-1] != path.sink_pin:
        violations.append(Violation('pin', f"sink mapped to {mapping.vertex_map[-1]}, pinned to {path.sink_pin}"))

    placement = defaultdict(list)
    for index, node in enumerate(mapping.vertex_map):
        placement[node].append(path.comp_reqs[index])
    _check_capacity(graph, placement, violations)

    for index, route in enumerate(mapping.edge_map):
        _check_route(graph, route, mapping.vertex_map[index], mapping.vertex_map[index + 1],
                     path.bw_reqs[index], f"dataflow edge {index}", violations)

    return FeasibilityReport(tuple(violations))


def mapping_cost(graph: ResourceGraph, mapping: CompleteMapping) -> float:
    """Sum of link latencies, each link counted once per dataflow edge routed over it"""
    total = 0.0
    for index, route in enumerate(mapping.edge_map):
        for a, b in _hops(route):
            link = graph.link(a, b) if a in graph and b in graph else None
            if link is None:
                raise MalformedMappingError(f"dataflow edge {index} uses unknown link {a}-{b}")
            total += link.latency
    return total


def widest_constrained_path(graph: ResourceGraph, a: NodeId, b: NodeId, bw: float) -> Optional[ConstrainedPath]:
    """Minimum-latency route using only links with at least `bw` bandwidth"""
    if a == b:
        return ConstrainedPath((a,), 0.0)

    full = graph.nx_graph
    usable = nx.subgraph_view(full, filter_edge=lambda u, v: full[u][v]['bandwidth'] >= bw)
    try:
        latency, nodes = nx.single_source_dijkstra(usable, a, b, weight='latency')
    except nx.NetworkXNoPath:
        return None

    # re-add hop by hop so the figure matches mapping_cost bit for bit
    total = 0.0
    for u, v in zip(nodes, nodes[1:]):
        total += full[u][v]['latency']
    return ConstrainedPath(tuple(nodes), total)


def verify_vertex_mapping(graph: ResourceGraph, path: DataflowPath,
                          vertex_map: Sequence[NodeId]) -> Tuple[FeasibilityReport, Optional[CompleteMapping]]:
    """Verify a vertex-only mapping by routing every dataflow edge on a bandwidth-feasible shortest path"""
    vertex_map = tuple(str(node) for node in vertex_map)
    if len(vertex_map) != path.p:
        violation = Violation('structure', f"vertex map has {len(vertex_map)} entries, pipeline has {path.p}")
        return FeasibilityReport((violation,)), None
    unknown = sorted({node for node in vertex_map if node not in graph})
    if unknown:
        return FeasibilityReport(tuple(Violation('structure', f"vertex map uses unknown node {node}") for node in unknown)), None

    routes = []
    missing = []
    for index in range(path.p - 1):
        found = widest_constrained_path(graph, vertex_map[index], vertex_map[index + 1], path.bw_reqs[index])
        if found is None:
            missing.append(Violation(
                'bandwidth',
                f"dataflow edge {index}: no route {vertex_map[index]}->{vertex_map[index + 1]} with bandwidth {path.bw_reqs[index]}",
            ))
            routes.append((vertex_map[index], vertex_map[index + 1]))
        else:
            routes.append(found.nodes)

    synthesized = CompleteMapping(vertex_map, tuple(routes))
    if missing:
        logger.debug("vertex map %s: %d dataflow edges without a route", vertex_map, len(missing))
        report = verify_path_mapping(graph, path, synthesized)
        kept = tuple(v for v in report.violations if v.kind in ('pin', 'capacity'))
        return FeasibilityReport(kept + tuple(missing)), None

    synthesized = CompleteMapping(vertex_map, tuple(routes), mapping_cost(graph, synthesized))
    return verify_path_mapping(graph, path, synthesized), synthesized


def verify_dag_mapping(graph: ResourceGraph, dag: DataflowDag,
                       vertex_map: Mapping[str, NodeId],
                       edge_map: Mapping[Tuple[str, str], Sequence[NodeId]]) -> FeasibilityReport:
    """Constraint check for a general dataflow DAG mapping.

    Shared links are checked per DAG edge independently. The report's
    details carry both cost figures: links counted once per DAG edge
    routed over them, and every used link counted once.
    """
    violations = []

    flow = nx.DiGraph()
    flow.add_nodes_from(dag.nodes)
    for (u, v) in dag.edges:
        if u not in dag.nodes or v not in dag.nodes:
            violations.append(Violation('structure', f"DAG edge {u}->{v} uses an undeclared node"))
        flow.add_edge(u, v)
    if not nx.is_directed_acyclic_graph(flow):
        violations.append(Violation('structure', "dataflow graph has a cycle"))
    if not dag.source_pins:
        violations.append(Violation('structure', "no designated sources"))
    if not dag.sink_pins:
        violations.append(Violation('structure', "no designated sinks"))
    for job in sorted(set(dag.source_pins) & set(dag.sink_pins)):
        violations.append(Violation('structure', f"{job} is both a source and a sink"))

    for job in dag.nodes:
        if job not in vertex_map:
            violations.append(Violation('structure', f"DAG node {job} is not mapped"))
        elif vertex_map[job] not in graph:
            violations.append(Violation('structure', f"DAG node {job} mapped to unknown node {vertex_map[job]}"))
    for edge in dag.edges:
        if edge not in edge_map:
            violations.append(Violation('structure', f"DAG edge {edge[0]}->{edge[1]} has no route"))
    if violations:
        return FeasibilityReport(tuple(violations))

    for pins in (dag.source_pins, dag.sink_pins):
        for job, pin in sorted(pins.items()):
            if vertex_map.get(job) != pin:
                violations.append(Violation('pin', f"{job} mapped to {vertex_map.get(job)}, pinned to {pin}"))

    placement = defaultdict(list)
    for job, req in dag.nodes.items():
        placement[vertex_map[job]].append(req)
    _check_capacity(graph, placement, violations)

    per_edge = 0.0
    shared = {}
    routed = True
    for (u, v), bw_req in dag.edges.items():
        route = tuple(str(node) for node in edge_map[(u, v)])
        links = _check_route(graph, route, vertex_map[u], vertex_map[v], bw_req, f"DAG edge {u}->{v}", violations)
        if links is None:
            routed = False
            continue
        for link in links:
            per_edge += link.latency
            shared[frozenset((link.u, link.v))] = link.latency

    details = {}
    if routed:
        details = {'cost_per_edge': per_edge, 'cost_shared_once': math.fsum(shared.values())}
    return FeasibilityReport(tuple(violations), details)
