import heapq
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from exact import MODES, RunStats, extend, init_source_maps
from model import Block, CompleteMapping, DataflowPath, NodeId, PartialMap, ResourceGraph
from policy import AdmissionPolicy, AllNeighbors, KeepAll, NeighborPolicy, admit, select_neighbors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MapMessage:
    """A partial map in flight; its last block is the receiver with no computations yet"""

    map: PartialMap
    source: NodeId
    destination: NodeId
    send_time: float
    deliver_time: float
    seq: int
    carries_spec: bool = False

    def to_dict(self):
        return {
            'seq': self.seq,
            'source': self.source,
            'destination': self.destination,
            'send_time': self.send_time,
            'deliver_time': self.deliver_time,
            'carries_spec': self.carries_spec,
            'blocks': [[node, count] for node, count in self.map.blocks],
            'cost': self.map.cost,
        }


@dataclass
class NodeStats:
    messages_received: int = 0
    messages_sent: int = 0
    maps_admitted: int = 0
    maps_rejected: int = 0
    spec_received: bool = False


@dataclass
class NodeState:
    node: NodeId
    slots: Dict[int, Dict[Tuple[Block, ...], PartialMap]] = field(default_factory=dict)
    seen_spec: bool = False
    stats: NodeStats = field(default_factory=NodeStats)

    def stored(self) -> int:
        return sum(len(slot) for slot in self.slots.values())

    def to_dict(self):
        return {'node': self.node, 'stored_maps': self.stored(), **asdict(self.stats)}


@dataclass(frozen=True)
class SimConfig:
    mode: str = 'optimal'
    admission: AdmissionPolicy = field(default_factory=KeepAll)
    neighbors: NeighborPolicy = field(default_factory=AllNeighbors)
    seed: int = 0
    max_simulated_time: float = math.inf
    max_messages: Optional[int] = None
    record_trace: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.max_simulated_time > 0:
            raise ValueError(f"max_simulated_time must be positive, got {self.max_simulated_time}")
        if self.max_messages is not None and self.max_messages < 1:
            raise ValueError(f"max_messages must be at least 1, got {self.max_messages}")

    def describe(self):
        return {'mode': self.mode, **self.admission.describe(), **self.neighbors.describe(), 'seed': self.seed}


@dataclass
class SimulationResult:
    best: Optional[CompleteMapping]
    solutions: List[CompleteMapping]
    stats: RunStats
    per_node: List[dict]
    truncated: bool = False
    pending_messages: int = 0
    trace: List[MapMessage] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.best is not None

    def to_dict(self, include_all=False):
        document = {'feasible': self.feasible, 'truncated': self.truncated}
        if self.best is not None:
            document['mapping'] = self.best.to_dict()
        if include_all:
            document['all_at_sink'] = [mapping.to_dict() for mapping in self.solutions]
        document['stats'] = self.stats.to_dict()
        document['per_node'] = self.per_node
        document['pending_messages'] = self.pending_messages
        return document


class DistributedSimulator:
    """Single-threaded discrete-event run of the per-node map processing protocol.

    Every resource node owns its map sets and reacts to arriving map
    messages; delivery order is (deliver_time, seq) where deliver_time is
    the latency accumulated along the map's route.
    """

    def __init__(self, graph: ResourceGraph, path: DataflowPath, config: Optional[SimConfig] = None):
        self.graph = graph
        self.path = path
        self.config = config or SimConfig()
        self.admission = self.config.admission.resolved(graph, path)
        self.rng = np.random.default_rng(self.config.seed)
        self.nodes = {node: NodeState(node) for node in graph.nodes}
        self.stats = RunStats(avg_indegree=graph.avg_indegree())
        self.queue: List[Tuple[float, int, MapMessage]] = []
        self.trace: List[MapMessage] = []
        self.solutions: Dict[Tuple[Block, ...], PartialMap] = {}
        self.now = 0.0
        self.stopped = False
        self.truncated = False
        self._seq = 0
        self._stored = 0
        self._spec_size = len(json.dumps(path.to_dict(), sort_keys=True))

    def _store(self, state: NodeState, prefix_len: int, candidate: PartialMap, round: int) -> bool:
        slot = state.slots.setdefault(prefix_len, {})
        decision = admit(slot, candidate, self.admission, round, self.rng)
        if not decision.admit:
            state.stats.maps_rejected += 1
            self.stats.maps_discarded += 1
            return False

        if self.config.debug_checks:
            problems = candidate.check(self.graph, self.path)
            if problems or candidate.last_node != state.node:
                raise AssertionError(f"unsound map {candidate.blocks} at {state.node}: {problems}")

        for evicted in decision.evict:
            if slot.pop(evicted.blocks, None) is not None:
                self._stored -= 1
                self.stats.maps_discarded += 1
        slot[candidate.blocks] = candidate
        self._stored += 1
        state.stats.maps_admitted += 1
        self.stats.maps_admitted += 1
        self.stats.max_slot_size = max(self.stats.max_slot_size, len(slot))
        self.stats.total_map_count = max(self.stats.total_map_count, self._stored)
        return True

    def _count_extensions(self, attempts: int, succeeded: int):
        self.stats.extension_attempts += attempts
        self.stats.extensions_succeeded += succeeded
        self.stats.max_attempts_per_relax = max(self.stats.max_attempts_per_relax, attempts)

    def _send(self, m: PartialMap, source: NodeId, destination: NodeId) -> MapMessage:
        link = self.graph.link(source, destination)
        receiver = self.nodes[destination]
        carries_spec = not receiver.seen_spec
        if carries_spec:
            receiver.seen_spec = True
            self.stats.spec_messages += 1
            self.stats.spec_bytes += self._spec_size

        message = MapMessage(
            map=m.appended(destination, 0, link.latency),
            source=source,
            destination=destination,
            send_time=self.now,
            deliver_time=self.now + link.latency,
            seq=self._seq,
            carries_spec=carries_spec,
        )
        self._seq += 1
        heapq.heappush(self.queue, (message.deliver_time, message.seq, message))
        self.stats.messages_sent += 1
        self.nodes[source].stats.messages_sent += 1
        if self.config.record_trace:
            self.trace.append(message)
        return message

    def _fan_out(self, m: PartialMap, targets: List[NodeId]) -> List[MapMessage]:
        """Send m to every target whose link carries the dataflow edge in flight"""
        in_flight = self.path.bw_reqs[m.prefix_len - 1]
        sent = []
        for v in targets:
            if in_flight <= self.graph.link(m.last_node, v).bandwidth:
                sent.append(self._send(m, m.last_node, v))
        return sent

    def bootstrap(self) -> List[MapMessage]:
        """Source node: store the initial maps and send each to the selected neighbors"""
        source = self.nodes[self.path.source_pin]
        source.seen_spec = True
        source.stats.spec_received = True
        sent = []
        for m in init_source_maps(self.graph, self.path):
            if not self._store(source, m.prefix_len, m, 0):
                continue
            targets = select_neighbors(self.graph.neighbors(source.node), self.config.neighbors, self.rng)
            sent.extend(self._fan_out(m, targets))
        return sent

    def process_map(self, state: NodeState, message: MapMessage) -> List[MapMessage]:
        """React to one arriving map; returns the messages it emits"""
        m = message.map
        path = self.path
        p = path.p
        prefix = m.prefix_len
        state.stats.messages_received += 1
        if message.carries_spec:
            state.stats.spec_received = True
        round = m.hops

        if state.node == path.sink_pin:
            completed = extend(m, p - prefix, state.node, self.graph, path)
            self._count_extensions(1, int(completed is not None))
            if completed is None:
                return []
            if self._store(state, p, completed, round):
                self.solutions[completed.blocks] = completed
                logger.debug("complete map at t=%s with cost %s", self.now, completed.cost)
                if self.config.mode == 'first_feasible':
                    self.stopped = True
            return []

        if not self._store(state, prefix, m, round):
            return []

        candidates = [v for v in self.graph.neighbors(state.node) if not m.visits(v)]
        targets = select_neighbors(candidates, self.config.neighbors, self.rng)
        sent = []
        attempts = succeeded = 0
        for x in range(0, p - prefix):
            attempts += 1
            filled = extend(m, x, state.node, self.graph, path)
            if filled is None:
                break
            succeeded += 1
            if x > 0 and not self._store(state, prefix + x, filled, round):
                continue
            sent.extend(self._fan_out(filled, targets))
        self._count_extensions(attempts, succeeded)
        return sent

    def run(self) -> SimulationResult:
        started = time.perf_counter()
        logger.info("simulate: %d nodes, %d links, p=%d, %s", len(self.graph), self.graph.number_of_links(),
                    self.path.p, self.config.describe())
        self.bootstrap()
        max_messages = self.config.max_messages

        while self.queue and not self.stopped:
            deliver_time, _, message = self.queue[0]
            if deliver_time > self.config.max_simulated_time:
                self.truncated = True
                break
            if max_messages is not None and self.stats.messages_sent > max_messages:
                self.truncated = True
                break
            heapq.heappop(self.queue)
            self.now = deliver_time
            self.stats.relax_calls += 1
            self.stats.iterations_used = max(self.stats.iterations_used, message.map.hops)
            self.process_map(self.nodes[message.destination], message)

        if self.truncated:
            logger.warning("simulation truncated at t=%s with %d messages pending", self.now, len(self.queue))

        complete = sorted(self.solutions.values(), key=PartialMap.sort_key)
        sink_slot = self.nodes[self.path.sink_pin].slots.get(self.path.p, {})
        solutions = [m.to_complete(self.path) for m in complete if m.blocks in sink_slot]
        self.stats.wall_ms = (time.perf_counter() - started) * 1000.0
        best = solutions[0] if solutions else None
        logger.info("simulation finished after %d messages: %s", self.stats.messages_sent,
                    f"cost {best.cost}" if best else "infeasible")
        return SimulationResult(
            best=best,
            solutions=solutions,
            stats=self.stats,
            per_node=[self.nodes[node].to_dict() for node in self.graph.nodes],
            truncated=self.truncated,
            pending_messages=len(self.queue),
            trace=list(self.trace),
        )


def run_simulation(graph: ResourceGraph, path: DataflowPath, config: Optional[SimConfig] = None) -> SimulationResult:
    return DistributedSimulator(graph, path, config).run()
