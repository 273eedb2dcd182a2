import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from model import Block, CompleteMapping, DataflowPath, NodeId, PartialMap, ResourceGraph
from policy import AdmissionPolicy, AllNeighbors, KeepAll, LeastCost, NeighborPolicy, admit, select_neighbors

logger = logging.getLogger(__name__)

MODES = ('first_feasible', 'optimal')

SlotKey = Tuple[NodeId, int]

# relative slack on the incumbent so float rounding never prunes an optimal map
BOUND_SLACK = 1e-9


@dataclass
class RunStats:
    """Counters observed during one solver or simulator run"""

    relax_calls: int = 0
    extension_attempts: int = 0
    extensions_succeeded: int = 0
    maps_admitted: int = 0
    maps_discarded: int = 0
    max_slot_size: int = 0
    total_map_count: int = 0
    iterations_used: int = 0
    messages_sent: int = 0
    spec_messages: int = 0
    spec_bytes: int = 0
    max_attempts_per_relax: int = 0
    avg_indegree: float = 0.0
    low_memory_bound: Optional[int] = None
    wall_ms: float = 0.0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, document):
        known = {name: document[name] for name in cls.__dataclass_fields__ if name in document}
        return cls(**known)


def relax_attempt_bound(p: int, max_slot_size: int) -> float:
    """Upper bound on extension attempts of a single relax call"""
    return max_slot_size * (p + (p - 1) * p / 4 + (p - 1) * p * (2 * p - 1) / 12)


@dataclass(frozen=True)
class SolverConfig:
    mode: str = 'optimal'
    admission: AdmissionPolicy = field(default_factory=KeepAll)
    neighbors: NeighborPolicy = field(default_factory=AllNeighbors)
    retain_old: bool = True
    max_iterations: Optional[int] = None
    seed: int = 0
    debug_checks: bool = False
    prune_by_bound: bool = False
    cost_bound: Optional[float] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cost_bound is not None and not self.cost_bound >= 0:
            raise ValueError(f"cost_bound must be non-negative, got {self.cost_bound}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")

    def describe(self):
        return {
            'mode': self.mode,
            **self.admission.describe(),
            **self.neighbors.describe(),
            'retain_old': self.retain_old,
            'max_iterations': self.max_iterations,
            'seed': self.seed,
            'prune_by_bound': self.prune_by_bound,
        }


class SolverState:
    """Per-node map sets M(v, prefix length) plus the fresh frontier of the last sweep"""

    def __init__(self, graph: ResourceGraph, path: DataflowPath, config: Optional[SolverConfig] = None):
        self.graph = graph
        self.path = path
        self.config = config or SolverConfig()
        self.admission = self.config.admission.resolved(graph, path)
        self.rng = np.random.default_rng(self.config.seed)
        self.slots: Dict[SlotKey, Dict[Tuple[Block, ...], PartialMap]] = {}
        self.frontier: Dict[SlotKey, List[PartialMap]] = {}
        self.admitted: Dict[SlotKey, List[PartialMap]] = {}
        self.round = 0
        self.stats = RunStats(avg_indegree=graph.avg_indegree())
        if not self.config.retain_old:
            self.stats.low_memory_bound = math.ceil(graph.avg_indegree() * path.p)
        self._stored = 0
        self.bound = math.inf
        self.to_sink: Optional[Dict[NodeId, float]] = None
        if self.config.prune_by_bound:
            if self.config.cost_bound is not None:
                self.bound = self.config.cost_bound
            self.to_sink = nx.single_source_dijkstra_path_length(graph.nx_graph, path.sink_pin, weight='latency')

    @property
    def sink_key(self) -> SlotKey:
        return (self.path.sink_pin, self.path.p)

    def slot(self, node: NodeId, prefix_len: int) -> List[PartialMap]:
        return list(self.slots.get((node, prefix_len), {}).values())

    def complete_maps(self) -> List[PartialMap]:
        return sorted(self.slots.get(self.sink_key, {}).values(), key=PartialMap.sort_key)

    def offer(self, key: SlotKey, candidate: PartialMap) -> bool:
        """Run admission for one candidate; True when it was stored"""
        slot = self.slots.setdefault(key, {})
        if candidate.blocks in slot:
            self.stats.maps_discarded += 1
            return False
        if self.to_sink is not None and self._beyond_bound(key[0], candidate):
            self.stats.maps_discarded += 1
            return False

        decision = admit(slot, candidate, self.admission, self.round, self.rng)
        if not decision.admit:
            self.stats.maps_discarded += 1
            return False

        if self.config.debug_checks:
            problems = candidate.check(self.graph, self.path)
            if problems or candidate.last_node != key[0] or candidate.prefix_len != key[1]:
                raise AssertionError(f"unsound map {candidate.blocks} for slot {key}: {problems}")

        for evicted in decision.evict:
            if slot.pop(evicted.blocks, None) is not None:
                self._stored -= 1
                self.stats.maps_discarded += 1

        slot[candidate.blocks] = candidate
        self.admitted.setdefault(key, []).append(candidate)
        self._stored += 1
        self.stats.maps_admitted += 1
        self.stats.max_slot_size = max(self.stats.max_slot_size, len(slot))
        self.stats.total_map_count = max(self.stats.total_map_count, self._stored)
        if key == self.sink_key:
            self.bound = min(self.bound, candidate.cost)
        return True

    def _beyond_bound(self, node: NodeId, candidate: PartialMap) -> bool:
        """No completion of candidate can beat the incumbent, even over the fastest route to the sink"""
        remaining = self.to_sink.get(node)
        if remaining is None:
            return True
        return candidate.cost + remaining > self.bound + BOUND_SLACK * max(1.0, self.bound)

    def end_sweep(self):
        """Maps relaxed in this sweep turn old, maps admitted in it become the new frontier"""
        for key, maps in self.frontier.items():
            slot = self.slots.get(key)
            if not slot:
                continue
            for m in maps:
                if m.blocks not in slot:
                    continue
                if self.config.retain_old:
                    slot[m.blocks] = m.mark_old()
                else:
                    del slot[m.blocks]
                    self._stored -= 1

        self.frontier = {}
        for key, maps in self.admitted.items():
            if key[1] >= self.path.p:
                continue
            slot = self.slots.get(key, {})
            alive = [m for m in maps if m.blocks in slot]
            if alive:
                self.frontier[key] = alive
        self.admitted = {}

    def has_frontier(self, node: NodeId) -> bool:
        return any(key[0] == node for key in self.frontier)


def init_source_maps(graph: ResourceGraph, path: DataflowPath) -> List[PartialMap]:
    """Maps of the first 1, 2, ... computations on the source node, up to p - 1"""
    capacity = graph.capacity(path.source_pin)
    maps = []
    for length in range(1, path.p):
        if path.comp_sum(0, length) > capacity:
            break
        maps.append(PartialMap(((path.source_pin, length),)))
    return maps


def extend(m: PartialMap, x: int, v: NodeId, graph: ResourceGraph, path: DataflowPath) -> Optional[PartialMap]:
    """Place the next x computations on v, or None when v lacks the capacity.

    v is either a new neighbor of the map's last node (a new block is
    appended) or the last node itself (its trailing block is filled).
    """
    start = m.prefix_len
    if x < 0 or start + x > path.p:
        return None

    if v == m.last_node:
        _, count = m.blocks[-1]
        if path.comp_sum(start - count, start + x) > graph.capacity(v):
            return None
        return m.filled(x)

    link = graph.link(m.last_node, v)
    if link is None:
        raise ValueError(f"{v} is not adjacent to {m.last_node}")
    if path.comp_sum(start, start + x) > graph.capacity(v):
        return None
    return m.appended(v, x, link.latency)


def relax(u: NodeId, v: NodeId, state: SolverState) -> int:
    """Extend every fresh map at u across the link (u, v); returns the number of admitted maps"""
    graph, path, stats = state.graph, state.path, state.stats
    link = graph.link(u, v)
    if link is None:
        raise ValueError(f"no link {u}-{v}")

    stats.relax_calls += 1
    p = path.p
    attempts = 0
    admitted = 0
    for prefix in range(1, p):
        fresh = state.frontier.get((u, prefix))
        if not fresh:
            continue
        if path.bw_reqs[prefix - 1] > link.bandwidth:
            continue
        stored = state.slots.get((u, prefix), {})
        for m in fresh:
            if m.blocks not in stored or m.visits(v):
                continue
            if v == path.sink_pin:
                attempts += 1
                completed = extend(m, p - prefix, v, graph, path)
                if completed is not None:
                    stats.extensions_succeeded += 1
                    admitted += state.offer((v, p), completed)
                continue
            for x in range(0, p - prefix):
                attempts += 1
                extended = extend(m, x, v, graph, path)
                if extended is None:
                    break
                stats.extensions_succeeded += 1
                admitted += state.offer((v, prefix + x), extended)

    stats.extension_attempts += attempts
    stats.max_attempts_per_relax = max(stats.max_attempts_per_relax, attempts)
    return admitted


@dataclass
class PathmapResult:
    best: Optional[CompleteMapping]
    all_at_sink: List[CompleteMapping]
    stats: RunStats

    @property
    def feasible(self) -> bool:
        return self.best is not None

    def to_dict(self, include_all=False):
        document = {'feasible': self.feasible}
        if self.best is not None:
            document['mapping'] = self.best.to_dict()
        if include_all:
            document['all_at_sink'] = [mapping.to_dict() for mapping in self.all_at_sink]
        document['stats'] = self.stats.to_dict()
        return document


def seed_state(graph: ResourceGraph, path: DataflowPath, config: Optional[SolverConfig] = None) -> SolverState:
    """Solver state after initialization: the source maps form the first frontier"""
    state = SolverState(graph, path, config)
    for m in init_source_maps(graph, path):
        state.offer((path.source_pin, m.prefix_len), m)
    state.end_sweep()
    return state


def run_sweeps(state: SolverState) -> SolverState:
    """Bellman-Ford style sweeps of relax over every link orientation"""
    graph, path, config, stats = state.graph, state.path, state.config, state.stats
    limit = config.max_iterations or max(len(graph) - 1, 1)
    first_only = config.mode == 'first_feasible'
    logger.info("pathmap: %d nodes, %d links, p=%d, %s", len(graph), graph.number_of_links(), path.p,
                config.describe())

    for sweep in range(1, limit + 1):
        state.round = sweep
        admitted = 0
        found = False
        for u in graph.nodes:
            for v in select_neighbors(graph.neighbors(u), config.neighbors, state.rng):
                admitted += relax(u, v, state)
                if first_only and state.slots.get(state.sink_key):
                    found = True
                    break
            if found:
                break
        stats.iterations_used = sweep
        state.end_sweep()
        logger.debug("sweep %d admitted %d maps, %d complete", sweep, admitted,
                     len(state.slots.get(state.sink_key, {})))
        if found or admitted == 0:
            break
    return state


def pathmap(graph: ResourceGraph, path: DataflowPath, config: Optional[SolverConfig] = None) -> PathmapResult:
    started = time.perf_counter()
    state = run_sweeps(seed_state(graph, path, config))
    stats = state.stats
    complete = [m.to_complete(path) for m in state.complete_maps()]
    stats.wall_ms = (time.perf_counter() - started) * 1000.0
    best = complete[0] if complete else None
    logger.info("pathmap finished after %d sweeps: %s", stats.iterations_used,
                f"cost {best.cost}" if best else "infeasible")
    return PathmapResult(best, complete, stats)


def bounded_optimal(graph: ResourceGraph, path: DataflowPath, seed: int = 0) -> PathmapResult:
    """Keep-all optimum with partial maps pruned against an incumbent cost.

    The LeastCost solution seeds the incumbent; a map is dropped once its cost
    plus the fastest route from its node to the sink exceeds it. Every optimal
    map survives, so the best mapping equals the plain keep-all one while far
    fewer maps are stored on larger graphs.
    """
    incumbent = pathmap(graph, path, SolverConfig(admission=LeastCost(), seed=seed))
    bound = incumbent.best.cost if incumbent.feasible else None
    config = SolverConfig(admission=KeepAll(), seed=seed, prune_by_bound=True, cost_bound=bound)
    result = pathmap(graph, path, config)
    result.stats.wall_ms += incumbent.stats.wall_ms
    return result
