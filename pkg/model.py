import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import networkx as nx

from errors import InstanceFormatError

NodeId = str
Block = Tuple[NodeId, int]

VIOLATION_KINDS = ('pin', 'capacity', 'bandwidth', 'continuity', 'structure')


def _number(value, field_name):
    """Read a JSON number, rejecting booleans and strings"""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFormatError(field_name, f"expected a number, got {value!r}")
    return float(value)


def _count(value, field_name):
    """Read a non-negative whole number of computations"""
    number = _number(value, field_name)
    if not number.is_integer() or number < 0:
        raise InstanceFormatError(field_name, f"expected a non-negative integer, got {value!r}")
    return int(number)


def _node_id(value, field_name):
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise InstanceFormatError(field_name, f"expected a node id, got {value!r}")
    return str(value)


def _require(document, key, field_name):
    if not isinstance(document, Mapping):
        raise InstanceFormatError(field_name, "expected an object")
    if key not in document:
        raise InstanceFormatError(f"{field_name}.{key}" if field_name else key, "missing field")
    return document[key]


def _list(value, field_name):
    if not isinstance(value, list):
        raise InstanceFormatError(field_name, "expected a list")
    return value


@dataclass(frozen=True)
class Link:
    u: NodeId
    v: NodeId
    bandwidth: float
    latency: float


class ResourceGraph:
    """Capacitated resource network; links are undirected and usable both ways"""

    def __init__(self, capacities: Mapping[NodeId, float], links: Iterable[Link]):
        graph = nx.Graph()
        for node, capacity in capacities.items():
            graph.add_node(str(node), capacity=float(capacity))

        for index, link in enumerate(links):
            u, v = str(link.u), str(link.v)
            location = f"graph.edges[{index}]"
            if u == v:
                raise InstanceFormatError(location, f"self-loop on node {u}")
            for endpoint in (u, v):
                if endpoint not in graph:
                    raise InstanceFormatError(location, f"undeclared node {endpoint}")
            if graph.has_edge(u, v):
                raise InstanceFormatError(location, f"duplicate link {u}-{v}")
            graph.add_edge(u, v, bandwidth=float(link.bandwidth), latency=float(link.latency))

        self._graph = nx.freeze(graph)
        self._nodes = tuple(sorted(graph.nodes))
        self._neighbors = {node: tuple(sorted(graph.neighbors(node))) for node in self._nodes}

    @property
    def nx_graph(self):
        """Frozen networkx view with `capacity`, `bandwidth` and `latency` attributes"""
        return self._graph

    @property
    def nodes(self) -> Tuple[NodeId, ...]:
        return self._nodes

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, node):
        return node in self._graph

    def capacity(self, node: NodeId) -> float:
        return self._graph.nodes[node]['capacity']

    def neighbors(self, node: NodeId) -> Tuple[NodeId, ...]:
        return self._neighbors[node]

    def link(self, u: NodeId, v: NodeId) -> Optional[Link]:
        """Link oriented u -> v, or None when the nodes are not adjacent"""
        data = self._graph.get_edge_data(u, v)
        if data is None:
            return None
        return Link(u, v, data['bandwidth'], data['latency'])

    def links(self) -> List[Link]:
        """Every link once, endpoints in sorted order"""
        result = []
        for u in self._nodes:
            for v in self._neighbors[u]:
                if u < v:
                    result.append(self.link(u, v))
        return result

    def orientations(self) -> Iterator[Tuple[NodeId, NodeId]]:
        """Both orientations of every link, sorted by tail then head"""
        for u in self._nodes:
            for v in self._neighbors[u]:
                yield u, v

    def number_of_links(self) -> int:
        return self._graph.number_of_edges()

    def avg_indegree(self) -> float:
        if not self._nodes:
            return 0.0
        return 2.0 * self.number_of_links() / len(self._nodes)

    def mean_latency(self) -> float:
        links = self.links()
        if not links:
            return 0.0
        return math.fsum(link.latency for link in links) / len(links)

    def capacities(self) -> Dict[NodeId, float]:
        return {node: self.capacity(node) for node in self._nodes}

    def __eq__(self, other):
        if not isinstance(other, ResourceGraph):
            return NotImplemented
        return self.capacities() == other.capacities() and self.links() == other.links()

    def __hash__(self):
        return hash((tuple(self.capacities().items()), tuple(self.links())))

    def __repr__(self):
        return f"ResourceGraph(nodes={len(self._nodes)}, links={self.number_of_links()})"

    def to_dict(self):
        return {
            'nodes': [{'id': node, 'capacity': self.capacity(node)} for node in self._nodes],
            'edges': [
                {'u': link.u, 'v': link.v, 'bandwidth': link.bandwidth, 'latency': link.latency}
                for link in self.links()
            ],
        }

    @classmethod
    def from_dict(cls, document, field_name='graph'):
        nodes = _list(_require(document, 'nodes', field_name), f"{field_name}.nodes")
        edges = _list(_require(document, 'edges', field_name), f"{field_name}.edges")

        capacities = {}
        for index, entry in enumerate(nodes):
            location = f"{field_name}.nodes[{index}]"
            node = _node_id(_require(entry, 'id', location), f"{location}.id")
            if node in capacities:
                raise InstanceFormatError(f"{location}.id", f"duplicate node {node}")
            capacities[node] = _number(_require(entry, 'capacity', location), f"{location}.capacity")

        links = []
        for index, entry in enumerate(edges):
            location = f"{field_name}.edges[{index}]"
            links.append(Link(
                _node_id(_require(entry, 'u', location), f"{location}.u"),
                _node_id(_require(entry, 'v', location), f"{location}.v"),
                _number(_require(entry, 'bandwidth', location), f"{location}.bandwidth"),
                _number(_require(entry, 'latency', location), f"{location}.latency"),
            ))
        return cls(capacities, links)


@dataclass(frozen=True)
class DataflowPath:
    """Linear pipeline: comp_reqs[0] is the source, comp_reqs[-1] the sink"""

    comp_reqs: Tuple[float, ...]
    bw_reqs: Tuple[float, ...]
    source_pin: NodeId
    sink_pin: NodeId

    def __post_init__(self):
        object.__setattr__(self, 'comp_reqs', tuple(float(value) for value in self.comp_reqs))
        object.__setattr__(self, 'bw_reqs', tuple(float(value) for value in self.bw_reqs))
        object.__setattr__(self, 'source_pin', str(self.source_pin))
        object.__setattr__(self, 'sink_pin', str(self.sink_pin))

    @property
    def p(self) -> int:
        return len(self.comp_reqs)

    def comp_sum(self, start: int, stop: int) -> float:
        # fsum is correctly rounded, so every caller agrees on boundary cases
        return math.fsum(self.comp_reqs[start:stop])

    def to_dict(self):
        return {
            'comp_reqs': list(self.comp_reqs),
            'bw_reqs': list(self.bw_reqs),
            'source_pin': self.source_pin,
            'sink_pin': self.sink_pin,
        }

    @classmethod
    def from_dict(cls, document, field_name='path'):
        comp_reqs = _list(_require(document, 'comp_reqs', field_name), f"{field_name}.comp_reqs")
        bw_reqs = _list(_require(document, 'bw_reqs', field_name), f"{field_name}.bw_reqs")
        return cls(
            tuple(_number(value, f"{field_name}.comp_reqs[{i}]") for i, value in enumerate(comp_reqs)),
            tuple(_number(value, f"{field_name}.bw_reqs[{i}]") for i, value in enumerate(bw_reqs)),
            _node_id(_require(document, 'source_pin', field_name), f"{field_name}.source_pin"),
            _node_id(_require(document, 'sink_pin', field_name), f"{field_name}.sink_pin"),
        )


@dataclass(frozen=True)
class DataflowDag:
    """General dataflow DAG; only verified, never solved"""

    nodes: Mapping[str, float]
    edges: Mapping[Tuple[str, str], float]
    source_pins: Mapping[str, NodeId]
    sink_pins: Mapping[str, NodeId]

    def to_dict(self):
        return {
            'nodes': [{'id': node, 'comp_req': req} for node, req in self.nodes.items()],
            'edges': [{'u': u, 'v': v, 'bw_req': req} for (u, v), req in self.edges.items()],
            'source_pins': dict(self.source_pins),
            'sink_pins': dict(self.sink_pins),
        }

    @classmethod
    def from_dict(cls, document, field_name='dag'):
        nodes = {}
        for index, entry in enumerate(_list(_require(document, 'nodes', field_name), f"{field_name}.nodes")):
            location = f"{field_name}.nodes[{index}]"
            nodes[_node_id(_require(entry, 'id', location), f"{location}.id")] = _number(
                _require(entry, 'comp_req', location), f"{location}.comp_req")
        edges = {}
        for index, entry in enumerate(_list(_require(document, 'edges', field_name), f"{field_name}.edges")):
            location = f"{field_name}.edges[{index}]"
            key = (_node_id(_require(entry, 'u', location), f"{location}.u"),
                   _node_id(_require(entry, 'v', location), f"{location}.v"))
            edges[key] = _number(_require(entry, 'bw_req', location), f"{location}.bw_req")
        pins = {}
        for key in ('source_pins', 'sink_pins'):
            raw = _require(document, key, field_name)
            if not isinstance(raw, Mapping):
                raise InstanceFormatError(f"{field_name}.{key}", "expected an object")
            pins[key] = {str(job): _node_id(node, f"{field_name}.{key}.{job}") for job, node in raw.items()}
        return cls(nodes, edges, pins['source_pins'], pins['sink_pins'])


@dataclass(frozen=True)
class PartialMap:
    """A pipeline prefix placed block by block along a simple resource route"""

    blocks: Tuple[Block, ...]
    cost: float = 0.0
    fresh: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple((str(node), int(count)) for node, count in self.blocks))

    @property
    def prefix_len(self) -> int:
        return sum(count for _, count in self.blocks)

    @property
    def last_node(self) -> NodeId:
        return self.blocks[-1][0]

    @property
    def hops(self) -> int:
        return len(self.blocks) - 1

    def route(self) -> Tuple[NodeId, ...]:
        return tuple(node for node, _ in self.blocks)

    def visits(self, node: NodeId) -> bool:
        return any(block_node == node for block_node, _ in self.blocks)

    def appended(self, node: NodeId, count: int, latency: float) -> 'PartialMap':
        return PartialMap(self.blocks + ((node, count),), self.cost + latency)

    def filled(self, extra: int) -> 'PartialMap':
        """Place `extra` more computations on the trailing block"""
        node, count = self.blocks[-1]
        return PartialMap(self.blocks[:-1] + ((node, count + extra),), self.cost)

    def mark_old(self) -> 'PartialMap':
        return replace(self, fresh=False)

    def sort_key(self):
        return (self.cost, self.blocks)

    def block_ranges(self) -> Iterator[Tuple[NodeId, int, int]]:
        """(node, first index, stop index) of the computations hosted by each block"""
        start = 0
        for node, count in self.blocks:
            yield node, start, start + count
            start += count

    def check(self, graph: ResourceGraph, path: DataflowPath) -> List[str]:
        """Every violated structural invariant, empty when the map is sound"""
        problems = []
        if not self.blocks:
            return ['no blocks']
        if self.blocks[0][0] != path.source_pin:
            problems.append(f"first block on {self.blocks[0][0]}, source pin is {path.source_pin}")
        if self.blocks[0][1] < 1:
            problems.append("first block hosts no computation")
        if len(set(self.route())) != len(self.blocks):
            problems.append("route revisits a node")
        if self.prefix_len > path.p:
            problems.append(f"prefix {self.prefix_len} exceeds pipeline length {path.p}")

        for node, start, stop in self.block_ranges():
            if node not in graph:
                problems.append(f"unknown node {node}")
                continue
            if path.comp_sum(start, stop) > graph.capacity(node):
                problems.append(f"capacity exceeded on {node}")

        expected_cost = 0.0
        placed = 0
        for (u, count), (v, _) in zip(self.blocks, self.blocks[1:]):
            placed += count
            link = graph.link(u, v) if u in graph and v in graph else None
            if link is None:
                problems.append(f"{u} and {v} are not adjacent")
                continue
            in_flight = placed - 1
            if in_flight < 0 or in_flight > path.p - 2:
                problems.append(f"no dataflow edge in flight on {u}-{v}")
            elif path.bw_reqs[in_flight] > link.bandwidth:
                problems.append(f"bandwidth exceeded on {u}-{v} by dataflow edge {in_flight}")
            expected_cost += link.latency
        if not problems and expected_cost != self.cost:
            problems.append(f"cost {self.cost} differs from route latency {expected_cost}")
        return problems

    def to_complete(self, path: DataflowPath) -> 'CompleteMapping':
        if self.prefix_len != path.p:
            raise ValueError(f"partial map places {self.prefix_len} of {path.p} computations")

        vertex_map = []
        positions = []
        for position, (node, count) in enumerate(self.blocks):
            vertex_map.extend([node] * count)
            positions.extend([position] * count)

        route = self.route()
        edge_map = tuple(
            route[positions[index]:positions[index + 1] + 1]
            for index in range(path.p - 1)
        )
        return CompleteMapping(tuple(vertex_map), edge_map, self.cost)

    def to_dict(self):
        return {
            'blocks': [[node, count] for node, count in self.blocks],
            'cost': self.cost,
            'fresh': self.fresh,
        }

    @classmethod
    def from_dict(cls, document, field_name='map'):
        blocks = []
        for index, block in enumerate(_list(_require(document, 'blocks', field_name), f"{field_name}.blocks")):
            if not isinstance(block, list) or len(block) != 2:
                raise InstanceFormatError(f"{field_name}.blocks[{index}]", "expected [node, count]")
            location = f"{field_name}.blocks[{index}]"
            blocks.append((_node_id(block[0], f"{location}[0]"), _count(block[1], f"{location}[1]")))
        return cls(
            tuple(blocks),
            _number(_require(document, 'cost', field_name), f"{field_name}.cost"),
            bool(document.get('fresh', True)),
        )


@dataclass(frozen=True)
class CompleteMapping:
    """Vertex map plus one resource route per dataflow edge"""

    vertex_map: Tuple[NodeId, ...]
    edge_map: Tuple[Tuple[NodeId, ...], ...]
    cost: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'vertex_map', tuple(str(node) for node in self.vertex_map))
        object.__setattr__(self, 'edge_map', tuple(tuple(str(node) for node in route) for route in self.edge_map))

    @property
    def key(self):
        """Identity of the placement, independent of the stated cost"""
        return (self.vertex_map, self.edge_map)

    def blocks(self) -> Tuple[Block, ...]:
        """Inverse of PartialMap.to_complete for mappings on a simple route"""
        route = [self.vertex_map[0]]
        counts = [1]
        for hop_route in self.edge_map:
            for node in hop_route[1:]:
                if node != route[-1]:
                    route.append(node)
                    counts.append(0)
            counts[-1] += 1
        return tuple(zip(route, counts))

    def sort_key(self):
        return (self.cost, self.blocks())

    def to_dict(self):
        document = {
            'vertex_map': list(self.vertex_map),
            'edge_map': [list(route) for route in self.edge_map],
        }
        if self.cost is not None:
            document['cost'] = self.cost
        return document

    @classmethod
    def from_dict(cls, document, field_name='mapping'):
        vertex_map = _list(_require(document, 'vertex_map', field_name), f"{field_name}.vertex_map")
        edge_map = _list(_require(document, 'edge_map', field_name), f"{field_name}.edge_map")
        cost = document.get('cost')
        return cls(
            tuple(_node_id(node, f"{field_name}.vertex_map[{i}]") for i, node in enumerate(vertex_map)),
            tuple(
                tuple(_node_id(node, f"{field_name}.edge_map[{i}][{j}]")
                      for j, node in enumerate(_list(route, f"{field_name}.edge_map[{i}]")))
                for i, route in enumerate(edge_map)
            ),
            None if cost is None else _number(cost, f"{field_name}.cost"),
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    location: str

    def to_dict(self):
        return {'kind': self.kind, 'location': self.location}


@dataclass(frozen=True)
class FeasibilityReport:
    violations: Tuple[Violation, ...] = ()
    details: Mapping[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def kinds(self):
        return {violation.kind for violation in self.violations}

    def to_dict(self):
        document = {
            'feasible': self.feasible,
            'violations': [violation.to_dict() for violation in self.violations],
        }
        if self.details:
            document['details'] = dict(self.details)
        return document

    @classmethod
    def from_dict(cls, document, field_name='report'):
        violations = []
        for index, entry in enumerate(_list(_require(document, 'violations', field_name), f"{field_name}.violations")):
            location = f"{field_name}.violations[{index}]"
            violations.append(Violation(str(_require(entry, 'kind', location)), str(_require(entry, 'location', location))))
        return cls(tuple(violations), dict(document.get('details', {})))


def _bad_value(value):
    return not math.isfinite(value) or value < 0


def validate_instance(graph: ResourceGraph, path: DataflowPath) -> FeasibilityReport:
    """Structural checks only; solvability is left to the solvers"""
    violations = []

    for node in graph.nodes:
        if _bad_value(graph.capacity(node)):
            violations.append(Violation('structure', f"node {node}: capacity {graph.capacity(node)}"))
    for link in graph.links():
        if _bad_value(link.bandwidth):
            violations.append(Violation('structure', f"link {link.u}-{link.v}: bandwidth {link.bandwidth}"))
        if _bad_value(link.latency):
            violations.append(Violation('structure', f"link {link.u}-{link.v}: latency {link.latency}"))

    if path.p < 2:
        violations.append(Violation('structure', f"pipeline has {path.p} computations, at least 2 required"))
    if len(path.bw_reqs) != max(path.p - 1, 0):
        violations.append(Violation('structure', f"{len(path.bw_reqs)} bandwidth requirements for {path.p} computations"))
    for index, value in enumerate(path.comp_reqs):
        if _bad_value(value):
            violations.append(Violation('structure', f"comp_reqs[{index}] = {value}"))
    for index, value in enumerate(path.bw_reqs):
        if _bad_value(value):
            violations.append(Violation('structure', f"bw_reqs[{index}] = {value}"))

    for name, pin in (('source_pin', path.source_pin), ('sink_pin', path.sink_pin)):
        if pin not in graph:
            violations.append(Violation('pin', f"{name} {pin} is not a resource node"))
    if path.source_pin == path.sink_pin:
        violations.append(Violation('pin', f"source and sink are both pinned to {path.source_pin}"))

    return FeasibilityReport(tuple(violations))


def load_instance(document) -> Tuple[ResourceGraph, DataflowPath]:
    graph = ResourceGraph.from_dict(_require(document, 'graph', ''), 'graph')
    path = DataflowPath.from_dict(_require(document, 'path', ''), 'path')
    return graph, path


def dump_instance(graph: ResourceGraph, path: DataflowPath):
    return {'graph': graph.to_dict(), 'path': path.to_dict()}
