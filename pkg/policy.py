import math
from dataclasses import dataclass
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

from model import DataflowPath, NodeId, PartialMap, ResourceGraph


class AdmissionDecision(NamedTuple):
    admit: bool
    evict: Tuple[PartialMap, ...] = ()


REJECT = AdmissionDecision(False)
ADMIT = AdmissionDecision(True)


def _contents(slot):
    """Slot maps, whether the slot is a sequence or a blocks -> map dict"""
    return list(slot.values()) if isinstance(slot, Mapping) else list(slot)


def _duplicate(slot, candidate):
    if isinstance(slot, Mapping):
        return candidate.blocks in slot
    return any(stored.blocks == candidate.blocks for stored in slot)


def _cheapest(maps):
    return min(maps, key=PartialMap.sort_key)


class AdmissionPolicy:
    """Decides which partial maps a (node, prefix length) slot keeps"""

    name = 'base'

    def decide(self, slot: Sequence[PartialMap], candidate: PartialMap, round: int, rng) -> AdmissionDecision:
        raise NotImplementedError

    def resolved(self, graph: ResourceGraph, path: DataflowPath) -> 'AdmissionPolicy':
        """Fill instance-dependent defaults"""
        return self

    def describe(self):
        return {'policy': self.name}


@dataclass(frozen=True)
class KeepAll(AdmissionPolicy):
    name = 'keepall'

    def decide(self, slot, candidate, round, rng):
        return REJECT if _duplicate(slot, candidate) else ADMIT


@dataclass(frozen=True)
class LeastCost(AdmissionPolicy):
    """One map per slot; a strictly cheaper candidate replaces the incumbent"""

    name = 'leastcost'

    def decide(self, slot, candidate, round, rng):
        if not slot:
            return ADMIT
        if _duplicate(slot, candidate):
            return REJECT
        if candidate.cost < _cheapest(_contents(slot)).cost:
            return AdmissionDecision(True, tuple(_contents(slot)))
        return REJECT


@dataclass(frozen=True)
class Annealed(AdmissionPolicy):
    """Keeps the cheapest map and admits costlier ones with Metropolis probability.

    The temperature cools geometrically with the round (sweep index in the
    centralized solver, hop count in the simulator).
    """

    t0: Optional[float] = None
    alpha: float = 0.9
    max_slot: int = 4

    name = 'annealed'

    def __post_init__(self):
        if self.t0 is not None and not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_slot < 1:
            raise ValueError(f"max_slot must be at least 1, got {self.max_slot}")

    def temperature(self, round: int) -> float:
        return self.t0 * self.alpha ** round

    def resolved(self, graph, path):
        if self.t0 is not None:
            return self
        t0 = graph.mean_latency() * path.p
        return Annealed(t0 if t0 > 0 else 1.0, self.alpha, self.max_slot)

    def decide(self, slot, candidate, round, rng):
        if not slot:
            return ADMIT
        if _duplicate(slot, candidate):
            return REJECT

        delta = candidate.cost - _cheapest(_contents(slot)).cost
        if delta > 0:
            temperature = self.temperature(round)
            if temperature <= 0 or rng.random() >= math.exp(-delta / temperature):
                return REJECT

        contents = _contents(slot) + [candidate]
        if len(contents) <= self.max_slot:
            return ADMIT
        keeper = _cheapest(contents)
        worst = max((m for m in contents if m.blocks != keeper.blocks), key=PartialMap.sort_key)
        if worst.blocks == candidate.blocks:
            return REJECT
        return AdmissionDecision(True, (worst,))

    def describe(self):
        return {'policy': self.name, 't0': self.t0, 'alpha': self.alpha, 'max_slot': self.max_slot}


class NeighborPolicy:
    """Chooses which neighbors a partial map is extended towards"""

    name = 'base'

    def select(self, neighbors: Sequence[NodeId], rng) -> List[NodeId]:
        raise NotImplementedError

    def describe(self):
        return {'neighbors': self.name}


@dataclass(frozen=True)
class AllNeighbors(NeighborPolicy):
    name = 'all'

    def select(self, neighbors, rng):
        return list(neighbors)


@dataclass(frozen=True)
class RandomNeighbors(NeighborPolicy):
    """Uniform sample of k neighbors without replacement"""

    k: int = 2

    name = 'randomk'

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")

    def select(self, neighbors, rng):
        neighbors = list(neighbors)
        if len(neighbors) <= self.k:
            return neighbors
        picks = rng.choice(len(neighbors), size=self.k, replace=False)
        return [neighbors[index] for index in sorted(int(i) for i in picks)]

    def describe(self):
        return {'neighbors': self.name, 'k': self.k}


def admit(slot: Sequence[PartialMap], candidate: PartialMap, policy: AdmissionPolicy,
          round: int, rng) -> AdmissionDecision:
    return policy.decide(slot, candidate, round, rng)


def select_neighbors(neighbors: Sequence[NodeId], policy: NeighborPolicy, rng) -> List[NodeId]:
    return policy.select(neighbors, rng)


def make_admission_policy(name: str, t0=None, alpha=0.9, max_slot=4) -> AdmissionPolicy:
    if name == 'keepall':
        return KeepAll()
    if name == 'leastcost':
        return LeastCost()
    if name == 'annealed':
        return Annealed(t0, alpha, max_slot)
    raise ValueError(f"unknown admission policy {name!r}")


def make_neighbor_policy(name: str, k=2) -> NeighborPolicy:
    if name == 'all':
        return AllNeighbors()
    if name == 'randomk':
        return RandomNeighbors(k)
    raise ValueError(f"unknown neighbor policy {name!r}")
