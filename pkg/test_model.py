import json
import math

import pytest

from errors import InstanceFormatError
from model import (CompleteMapping, DataflowDag, DataflowPath, FeasibilityReport, Link, PartialMap, ResourceGraph,
                   Violation, dump_instance, load_instance, validate_instance)


def test_k3_validates_clean(k3):
    graph, path = k3
    report = validate_instance(graph, path)
    assert report.feasible
    assert report.violations == ()


def test_single_computation_is_structure_violation(k3):
    graph, _ = k3
    report = validate_instance(graph, DataflowPath((1,), (), 'A', 'C'))
    assert 'structure' in report.kinds()


def test_unknown_source_pin_is_pin_violation(k3):
    graph, _ = k3
    report = validate_instance(graph, DataflowPath((1, 1), (1,), 'Z', 'C'))
    assert report.kinds() == {'pin'}


def test_equal_pins_rejected(k3):
    graph, _ = k3
    report = validate_instance(graph, DataflowPath((1, 1), (1,), 'A', 'A'))
    assert 'pin' in report.kinds()


@pytest.mark.parametrize('bad', [-1.0, math.inf, math.nan])
def test_bad_requirement_values(k3, bad):
    graph, _ = k3
    report = validate_instance(graph, DataflowPath((1, bad, 1), (1, 1), 'A', 'C'))
    assert 'structure' in report.kinds()


def test_negative_link_latency_reported():
    graph = ResourceGraph({'a': 1, 'b': 1}, [Link('a', 'b', 1, -2)])
    report = validate_instance(graph, DataflowPath((0, 0), (0,), 'a', 'b'))
    assert [v.kind for v in report.violations] == ['structure']
    assert 'latency' in report.violations[0].location


def test_bandwidth_requirement_count_mismatch(k3):
    graph, _ = k3
    report = validate_instance(graph, DataflowPath((1, 1, 1), (3,), 'A', 'C'))
    assert 'structure' in report.kinds()


@pytest.mark.parametrize('links, message', [
    ([Link('a', 'a', 1, 1)], 'self-loop'),
    ([Link('a', 'z', 1, 1)], 'undeclared'),
    ([Link('a', 'b', 1, 1), Link('b', 'a', 2, 2)], 'duplicate'),
])
def test_graph_construction_errors(links, message):
    with pytest.raises(InstanceFormatError, match=message):
        ResourceGraph({'a': 1, 'b': 1}, links)


def test_graph_queries(k3):
    graph, _ = k3
    assert graph.nodes == ('A', 'B', 'C')
    assert graph.neighbors('B') == ('A', 'C')
    assert graph.link('C', 'A') == Link('C', 'A', 2.0, 5.0)
    assert graph.link('A', 'A') is None
    assert list(graph.orientations()) == [('A', 'B'), ('A', 'C'), ('B', 'A'), ('B', 'C'), ('C', 'A'), ('C', 'B')]
    assert graph.avg_indegree() == 2.0
    assert graph.mean_latency() == pytest.approx(7 / 3)


def test_instance_document_round_trip(k3):
    graph, path = k3
    document = json.loads(json.dumps(dump_instance(graph, path)))
    assert load_instance(document) == (graph, path)


def test_sample_instance_loads(samples_dir, k3):
    document = json.loads((samples_dir / 'k3.json').read_text())
    assert load_instance(document) == k3


@pytest.mark.parametrize('document, field', [
    ({'path': {}}, 'graph'),
    ({'graph': {'nodes': [], 'edges': []}}, 'path'),
    ({'graph': {'nodes': [{'id': 'a'}], 'edges': []}, 'path': {}}, 'graph.nodes[0].capacity'),
    ({'graph': {'nodes': [{'id': 'a', 'capacity': 1}, {'id': 'b', 'capacity': 1}],
                'edges': [{'u': 'a', 'v': 'b', 'bandwidth': 1, 'latency': 'slow'}]}, 'path': {}},
     'graph.edges[0].latency'),
])
def test_malformed_documents_name_the_field(document, field):
    with pytest.raises(InstanceFormatError) as info:
        load_instance(document)
    assert info.value.field == field


def test_numeric_node_ids_become_strings():
    graph = ResourceGraph.from_dict({
        'nodes': [{'id': 1, 'capacity': 1}, {'id': 2, 'capacity': 1}],
        'edges': [{'u': 1, 'v': 2, 'bandwidth': 1, 'latency': 1}],
    })
    assert graph.nodes == ('1', '2')


def test_partial_map_accessors():
    m = PartialMap((('A', 1), ('B', 0), ('C', 2)), cost=2.0)
    assert m.prefix_len == 3
    assert m.last_node == 'C'
    assert m.hops == 2
    assert m.route() == ('A', 'B', 'C')
    assert list(m.block_ranges()) == [('A', 0, 1), ('B', 1, 1), ('C', 1, 3)]
    assert m.visits('B') and not m.visits('D')


def test_fresh_flag_does_not_affect_equality():
    m = PartialMap((('A', 1),))
    assert m.mark_old() == m
    assert not m.mark_old().fresh


def test_partial_map_check_accepts_solver_style_map(k3):
    graph, path = k3
    m = PartialMap((('A', 1),)).appended('B', 1, 1.0)
    assert m.check(graph, path) == []


def test_partial_map_check_flags_bandwidth(k3):
    graph, path = k3
    m = PartialMap((('A', 1),)).appended('C', 0, 5.0)
    problems = m.check(graph, path)
    assert any('bandwidth' in problem for problem in problems)


def test_partial_map_check_flags_revisit_and_cost(k3):
    graph, path = k3
    assert any('revisits' in problem for problem in PartialMap((('A', 1), ('B', 0), ('A', 0)), 2.0).check(graph, path))
    assert any('cost' in problem for problem in PartialMap((('A', 1), ('B', 1)), 3.0).check(graph, path))


def test_to_complete_and_back(k3):
    _, path = k3
    m = PartialMap((('A', 2), ('B', 0), ('C', 1)), cost=2.0)
    complete = m.to_complete(path)
    assert complete.vertex_map == ('A', 'A', 'C')
    assert complete.edge_map == (('A',), ('A', 'B', 'C'))
    assert complete.cost == 2.0
    assert complete.blocks() == m.blocks


def test_to_complete_requires_full_prefix(k3):
    _, path = k3
    with pytest.raises(ValueError):
        PartialMap((('A', 1),)).to_complete(path)


@pytest.mark.parametrize('value', [
    PartialMap((('A', 1), ('B', 0)), cost=1.0),
    CompleteMapping(('A', 'B', 'C'), (('A', 'B'), ('B', 'C')), 2.0),
    CompleteMapping(('A', 'A', 'C'), (('A',), ('A', 'C'))),
    FeasibilityReport((Violation('capacity', 'node B'),), {'cost_per_edge': 3.0}),
    DataflowPath((1, 2), (0.5,), 'a', 'b'),
])
def test_value_types_survive_json(value):
    document = json.loads(json.dumps(value.to_dict()))
    assert type(value).from_dict(document) == value


def test_dag_document_round_trip(dag_instance):
    _, dag, _, _ = dag_instance
    assert DataflowDag.from_dict(json.loads(json.dumps(dag.to_dict()))) == dag


@pytest.mark.parametrize('count', ['two', 1.5, -1, True])
def test_partial_map_count_errors_name_the_field(count):
    with pytest.raises(InstanceFormatError) as info:
        PartialMap.from_dict({'blocks': [['A', 1], ['B', count]], 'cost': 1.0})
    assert info.value.field == 'map.blocks[1][1]'


def test_partial_map_accepts_integral_float_count():
    assert PartialMap.from_dict({'blocks': [['A', 2.0]], 'cost': 0}).blocks == (('A', 2),)
