"""Brute-force ground truth for small instances and the longest-path reduction"""

import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from errors import OracleLimitError, ReductionError
from model import CompleteMapping, DataflowPath, Link, NodeId, PartialMap, ResourceGraph
from verify import verify_path_mapping

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 10


def _compositions(total: int, parts: int, last_min: int) -> Iterator[Tuple[int, ...]]:
    """Block counts summing to total: first >= 1, interior >= 0, last >= last_min"""
    if parts == 1:
        if total >= max(1, last_min):
            yield (total,)
        return

    def rest(remaining, slots):
        if slots == 1:
            if remaining >= last_min:
                yield (remaining,)
            return
        for count in range(remaining + 1):
            for tail in rest(remaining - count, slots - 1):
                yield (count,) + tail

    for first in range(1, total + 1):
        for tail in rest(total - first, parts - 1):
            yield (first,) + tail


def _build(graph: ResourceGraph, route: Sequence[NodeId], counts: Sequence[int]) -> PartialMap:
    m = PartialMap(((route[0], counts[0]),))
    for previous, node, count in zip(route, route[1:], counts[1:]):
        m = m.appended(node, count, graph.link(previous, node).latency)
    return m


def _check_size(graph: ResourceGraph, max_nodes: int, force: bool):
    if len(graph) > max_nodes and not force:
        raise OracleLimitError(f"graph has {len(graph)} nodes, oracle limit is {max_nodes}")


def enumerate_feasible(graph: ResourceGraph, path: DataflowPath, max_nodes: int = DEFAULT_MAX_NODES,
                       force: bool = False) -> List[CompleteMapping]:
    """Every feasible mapping along every simple source-sink route, cheapest first"""
    _check_size(graph, max_nodes, force)
    p = path.p
    found = []
    routes = nx.all_simple_paths(graph.nx_graph, path.source_pin, path.sink_pin)
    for route in sorted(tuple(route) for route in routes):
        for counts in _compositions(p, len(route), 1):
            m = _build(graph, route, counts)
            mapping = m.to_complete(path)
            if verify_path_mapping(graph, path, mapping).feasible:
                found.append((m.sort_key(), mapping))
    found.sort(key=lambda item: item[0])
    logger.debug("oracle: %d feasible mappings", len(found))
    return [mapping for _, mapping in found]


def brute_force_optimal(graph: ResourceGraph, path: DataflowPath, max_nodes: int = DEFAULT_MAX_NODES,
                        force: bool = False) -> Optional[CompleteMapping]:
    feasible = enumerate_feasible(graph, path, max_nodes, force)
    return feasible[0] if feasible else None


def enumerate_prefix_maps(graph: ResourceGraph, path: DataflowPath, route: Sequence[NodeId]) -> List[PartialMap]:
    """Feasible prefix maps along one fixed simple route, ending on its last node.

    A route ending on the sink pin yields complete maps only; any other
    route yields prefixes of 1 to p - 1 computations.
    """
    route = tuple(route)
    if not route or route[0] != path.source_pin:
        return []
    if any(graph.link(a, b) is None for a, b in zip(route, route[1:])):
        return []
    if path.sink_pin in route[:-1]:
        return []

    p = path.p
    totals = [p] if route[-1] == path.sink_pin else range(1, p)
    last_min = 1 if route[-1] == path.sink_pin else 0
    maps = []
    for total in totals:
        for counts in _compositions(total, len(route), last_min):
            m = _build(graph, route, counts)
            if not m.check(graph, path):
                maps.append(m)
    return sorted(maps, key=PartialMap.sort_key)


def longest_path_to_bcpm(g: nx.Graph, s, t, k: int) -> Tuple[ResourceGraph, DataflowPath]:
    """BCPM instance that is feasible exactly when g has a simple s-t path of at least k nodes"""
    if k < 2:
        raise ReductionError(f"path length must be at least 2, got {k}")
    if s == t:
        raise ReductionError("source and sink must differ")
    for pin in (s, t):
        if pin not in g:
            raise ReductionError(f"{pin} is not a node of the graph")

    graph = ResourceGraph(
        {str(node): 1.0 for node in g.nodes},
        [Link(str(u), str(v), 1.0, 1.0) for u, v in g.edges if u != v],
    )
    path = DataflowPath((1.0,) * k, (1.0,) * (k - 1), str(s), str(t))
    return graph, path


def longest_simple_path_nodes(g: nx.Graph, s, t) -> int:
    """Node count of the longest simple s-t path, 0 when t is unreachable"""
    if s == t:
        return 1
    return max((len(route) for route in nx.all_simple_paths(g, s, t)), default=0)
