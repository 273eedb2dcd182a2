import numpy as np
import pytest

from model import PartialMap
from policy import (AllNeighbors, Annealed, KeepAll, LeastCost, RandomNeighbors, admit, make_admission_policy,
                    make_neighbor_policy, select_neighbors)


def pm(cost, node='B'):
    return PartialMap((('A', 1), (node, 0)), cost=cost)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_keepall_rejects_only_duplicates(rng):
    slot = [pm(1.0)]
    assert admit(slot, pm(1.0), KeepAll(), 0, rng).admit is False
    assert admit(slot, pm(9.0, 'C'), KeepAll(), 0, rng).admit is True


def test_keepall_accepts_dict_slots(rng):
    stored = pm(1.0)
    slot = {stored.blocks: stored}
    assert not admit(slot, pm(1.0), KeepAll(), 0, rng).admit


def test_leastcost_replaces_costlier_incumbent(rng):
    incumbent = pm(5.0)
    decision = admit([incumbent], pm(3.0, 'C'), LeastCost(), 0, rng)
    assert decision.admit
    assert decision.evict == (incumbent,)


def test_leastcost_tie_keeps_incumbent(rng):
    assert not admit([pm(3.0)], pm(3.0, 'C'), LeastCost(), 0, rng).admit


def test_leastcost_admits_into_empty_slot(rng):
    assert admit([], pm(3.0), LeastCost(), 0, rng).admit


def test_annealed_cold_behaves_like_leastcost(rng):
    policy = Annealed(t0=1e-9, alpha=0.5, max_slot=4)
    for _ in range(50):
        assert not admit([pm(1.0)], pm(2.0, 'C'), policy, 10, rng).admit


def test_annealed_hot_admits_costlier(rng):
    policy = Annealed(t0=1e12, alpha=0.9, max_slot=4)
    assert admit([pm(1.0)], pm(2.0, 'C'), policy, 0, rng).admit


def test_annealed_always_admits_cheaper(rng):
    policy = Annealed(t0=1e-9)
    assert admit([pm(5.0)], pm(2.0, 'C'), policy, 100, rng).admit


def test_annealed_overflow_evicts_worst_non_minimum(rng):
    policy = Annealed(t0=1e12, max_slot=2)
    cheapest, middle = pm(1.0, 'B'), pm(4.0, 'C')
    decision = admit([cheapest, middle], pm(2.0, 'D'), policy, 0, rng)
    assert decision.admit
    assert decision.evict == (middle,)


def test_annealed_overflow_drops_worst_candidate(rng):
    policy = Annealed(t0=1e12, max_slot=2)
    decision = admit([pm(1.0, 'B'), pm(2.0, 'C')], pm(7.0, 'D'), policy, 0, rng)
    assert not decision.admit


def test_annealed_never_evicts_minimum():
    policy = Annealed(t0=5.0, alpha=0.9, max_slot=3)
    rng = np.random.default_rng(3)
    slot = {}
    best = None
    for index, cost in enumerate(rng.uniform(0, 10, size=200)):
        candidate = PartialMap((('A', 1), (f"n{index}", 0)), cost=float(cost))
        decision = admit(slot, candidate, policy, index % 7, rng)
        if decision.admit:
            for evicted in decision.evict:
                del slot[evicted.blocks]
            slot[candidate.blocks] = candidate
            best = candidate.cost if best is None else min(best, candidate.cost)
        assert len(slot) <= 3
        assert min(m.cost for m in slot.values()) == best


def test_annealed_default_temperature_from_instance(k3):
    graph, path = k3
    resolved = Annealed().resolved(graph, path)
    assert resolved.t0 == pytest.approx(7 / 3 * 3)
    assert resolved.temperature(2) == pytest.approx(7.0 * 0.81)


@pytest.mark.parametrize('kwargs', [{'t0': 0.0}, {'alpha': 1.0}, {'alpha': 0.0}, {'max_slot': 0}])
def test_annealed_parameter_ranges(kwargs):
    with pytest.raises(ValueError):
        Annealed(**kwargs)


def test_all_neighbors_is_identity(rng):
    assert select_neighbors(['B', 'C'], AllNeighbors(), rng) == ['B', 'C']


def test_randomk_with_large_k_returns_all(rng):
    assert select_neighbors(['B', 'C'], RandomNeighbors(5), rng) == ['B', 'C']


def test_randomk_is_seed_deterministic():
    neighbors = ['a', 'b', 'c', 'd', 'e']
    first = [select_neighbors(neighbors, RandomNeighbors(1), np.random.default_rng(11)) for _ in range(5)]
    assert all(choice == first[0] for choice in first)
    picked = select_neighbors(neighbors, RandomNeighbors(3), np.random.default_rng(11))
    assert len(picked) == 3 and len(set(picked)) == 3 and set(picked) <= set(neighbors)


def test_randomk_rejects_zero():
    with pytest.raises(ValueError):
        RandomNeighbors(0)


def test_policy_factories():
    assert isinstance(make_admission_policy('keepall'), KeepAll)
    assert make_admission_policy('annealed', 2.0, 0.5, 3) == Annealed(2.0, 0.5, 3)
    assert make_neighbor_policy('randomk', 4) == RandomNeighbors(4)
    with pytest.raises(ValueError):
        make_admission_policy('greedy')


def fill_slot(candidates, policy, rng):
    slot = {}
    for candidate in candidates:
        decision = admit(slot, candidate, policy, 0, rng)
        if decision.admit:
            for evicted in decision.evict:
                slot.pop(evicted.blocks, None)
            slot[candidate.blocks] = candidate
    return slot


def test_keepall_slot_independent_of_arrival_order(rng):
    candidates = [PartialMap((('A', 1), (node, count)), cost=cost)
                  for node, cost in (('B', 3.0), ('C', 1.0), ('D', 2.0)) for count in range(3)]
    candidates += candidates[:4]
    expected = set(fill_slot(candidates, KeepAll(), rng))
    assert len(expected) == 9
    for seed in range(20):
        order = np.random.default_rng(seed).permutation(len(candidates))
        assert set(fill_slot([candidates[i] for i in order], KeepAll(), rng)) == expected
