import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from model import DataflowPath, Link, NodeId, ResourceGraph

logger = logging.getLogger(__name__)

# one seeded stream per generation stage
POSITION_STREAM = 0
TREE_STREAM = 1
ATTRIBUTE_STREAM = 2
PATH_STREAM = 3
PAIR_STREAM = 4


def _check_range(name, bounds):
    lo, hi = bounds
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or lo > hi:
        raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {bounds}")


@dataclass(frozen=True)
class GenParams:
    """Waxman topology and random pipeline parameters"""

    n: int = 10
    waxman_alpha: float = 0.15
    waxman_beta: float = 0.2
    capacity_range: Tuple[float, float] = (1.0, 10.0)
    bandwidth_range: Tuple[float, float] = (1.0, 10.0)
    latency_range: Tuple[float, float] = (1.0, 10.0)
    p: int = 4
    req_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ('capacity_range', 'bandwidth_range', 'latency_range'):
            bounds = tuple(float(value) for value in getattr(self, name))
            if len(bounds) != 2:
                raise ValueError(f"{name} must be a [lo, hi] pair")
            _check_range(name, bounds)
            object.__setattr__(self, name, bounds)
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.p < 2:
            raise ValueError(f"p must be at least 2, got {self.p}")
        if not self.waxman_alpha > 0:
            raise ValueError(f"waxman_alpha must be positive, got {self.waxman_alpha}")
        if not 0 < self.waxman_beta <= 1:
            raise ValueError(f"waxman_beta must lie in (0, 1], got {self.waxman_beta}")
        if not 0 <= self.req_scale <= 1:
            raise ValueError(f"req_scale must lie in [0, 1], got {self.req_scale}")

    def to_dict(self):
        document = asdict(self)
        for name in ('capacity_range', 'bandwidth_range', 'latency_range'):
            document[name] = list(document[name])
        return document

    @classmethod
    def from_dict(cls, document):
        known = {name: document[name] for name in cls.__dataclass_fields__ if name in document}
        return cls(**known)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def node_names(n: int) -> List[NodeId]:
    width = len(str(n - 1))
    return [f"n{i:0{width}d}" for i in range(n)]


def _positions(params: GenParams) -> np.ndarray:
    return _rng(params.seed, POSITION_STREAM).random((params.n, 2))


def waxman_probabilities(positions: np.ndarray, alpha: float, beta: float) -> Dict[Tuple[int, int], float]:
    """beta * exp(-d / (alpha * L)) for every pair i < j, L the largest pairwise distance"""
    n = len(positions)
    distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    longest = float(distances.max()) if n > 1 else 0.0
    probabilities = {}
    for i in range(n):
        for j in range(i + 1, n):
            if longest > 0:
                probabilities[(i, j)] = beta * math.exp(-float(distances[i, j]) / (alpha * longest))
            else:
                probabilities[(i, j)] = beta
    return probabilities


def _spanning_tree(params: GenParams) -> nx.Graph:
    if params.n == 2:
        return nx.path_graph(2)
    rng = _rng(params.seed, TREE_STREAM)
    sequence = [int(value) for value in rng.integers(0, params.n, size=params.n - 2)]
    return nx.from_prufer_sequence(sequence)


def _topology_edges(params: GenParams) -> Tuple[List[Tuple[int, int]], Dict[Tuple[int, int], float], nx.Graph]:
    positions = _positions(params)
    probabilities = waxman_probabilities(positions, params.waxman_alpha, params.waxman_beta)
    draws = _rng(params.seed, PAIR_STREAM).random(len(probabilities))

    edges = set()
    for draw, (pair, probability) in zip(draws, probabilities.items()):
        if draw < probability:
            edges.add(pair)
    tree = _spanning_tree(params)
    for u, v in tree.edges:
        edges.add((min(u, v), max(u, v)))
    return sorted(edges), probabilities, tree


def waxman_topology(params: GenParams) -> ResourceGraph:
    """Connected Waxman graph with uniform random capacities, bandwidths and latencies"""
    names = node_names(params.n)
    edges, _, _ = _topology_edges(params)
    rng = _rng(params.seed, ATTRIBUTE_STREAM)

    capacities = rng.uniform(*params.capacity_range, size=params.n)
    bandwidths = rng.uniform(*params.bandwidth_range, size=len(edges))
    latencies = rng.uniform(*params.latency_range, size=len(edges))

    graph = ResourceGraph(
        {name: float(capacity) for name, capacity in zip(names, capacities)},
        [
            Link(names[i], names[j], float(bandwidth), float(latency))
            for (i, j), bandwidth, latency in zip(edges, bandwidths, latencies)
        ],
    )
    logger.debug("waxman topology: %d nodes, %d links (seed %d)", len(graph), graph.number_of_links(), params.seed)
    return graph


def expected_edge_count(params: GenParams) -> float:
    """Expected link count given this seed's node positions and spanning tree"""
    _, probabilities, tree = _topology_edges(params)
    tree_pairs = {(min(u, v), max(u, v)) for u, v in tree.edges}
    return math.fsum(
        1.0 if pair in tree_pairs else probability
        for pair, probability in probabilities.items()
    )


def random_dataflow_path(graph: ResourceGraph, params: GenParams) -> DataflowPath:
    """Random pipeline between two distinct pins, requirements scaled to the median supply"""
    if len(graph) < 2:
        raise ValueError("graph needs at least 2 nodes for distinct pins")
    rng = _rng(params.seed, PATH_STREAM)

    nodes = list(graph.nodes)
    source_index, sink_index = rng.choice(len(nodes), size=2, replace=False)
    capacity_median = float(np.median([graph.capacity(node) for node in nodes]))
    links = graph.links()
    bandwidth_median = float(np.median([link.bandwidth for link in links])) if links else 0.0

    comp_reqs = rng.uniform(0.0, params.req_scale * capacity_median, size=params.p)
    bw_reqs = rng.uniform(0.0, params.req_scale * bandwidth_median, size=params.p - 1)
    return DataflowPath(
        tuple(float(value) for value in comp_reqs),
        tuple(float(value) for value in bw_reqs),
        nodes[int(source_index)],
        nodes[int(sink_index)],
    )


def generate_instance(params: GenParams) -> Tuple[ResourceGraph, DataflowPath]:
    graph = waxman_topology(params)
    return graph, random_dataflow_path(graph, params)
