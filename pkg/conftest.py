from pathlib import Path

import pytest

from bench import BenchConfig, instance_params
from gen import GenParams, generate_instance
from model import DataflowDag, DataflowPath, Link, ResourceGraph

SAMPLES = Path(__file__).parent / 'samples'


def k3_graph(cross_bandwidth=5.0):
    return ResourceGraph(
        {'A': 2, 'B': 1, 'C': 2},
        [
            Link('A', 'B', cross_bandwidth, 1),
            Link('B', 'C', cross_bandwidth, 1),
            Link('A', 'C', 2, 5),
        ],
    )


def k3_path():
    return DataflowPath((1, 1, 1), (3, 3), 'A', 'C')


def desk_instances(count, n_range=(4, 9), p_range=(3, 6), first_seed=0):
    """Seeded small instances, sizes drawn the way the bench draws them"""
    config = BenchConfig(n_range=n_range, p_range=p_range)
    return [generate_instance(instance_params(config, seed)) for seed in range(first_seed, first_seed + count)]


@pytest.fixture
def k3():
    return k3_graph(), k3_path()


@pytest.fixture
def k3_blocked():
    """K3 with the links through B too thin for the pipeline"""
    return k3_graph(cross_bandwidth=2.0), k3_path()


@pytest.fixture
def single_edge():
    graph = ResourceGraph({'s': 3, 't': 3}, [Link('s', 't', 4, 7)])
    return graph, DataflowPath((1, 2), (4,), 's', 't')


@pytest.fixture
def dag_instance():
    """Two sources, two compute stages and one sink on an eight-node network"""
    capacities = {'A': 2, 'B': 2, 'C': 1, 'D': 1, 'E': 3, 'F': 2, 'G': 3, 'H': 1}
    links = [Link(u, v, 5, 1) for u, v in
             [('A', 'C'), ('C', 'E'), ('B', 'D'), ('D', 'E'), ('E', 'G'), ('C', 'G'), ('G', 'H'), ('H', 'F')]]
    dag = DataflowDag(
        nodes={'s1': 1, 's2': 1, 'x1': 2, 'x2': 2, 't': 1},
        edges={('s1', 'x1'): 2, ('s2', 'x1'): 2, ('x1', 'x2'): 3, ('s1', 'x2'): 1, ('x2', 't'): 2},
        source_pins={'s1': 'A', 's2': 'B'},
        sink_pins={'t': 'F'},
    )
    vertex_map = {'s1': 'A', 's2': 'B', 'x1': 'E', 'x2': 'G', 't': 'F'}
    edge_map = {
        ('s1', 'x1'): ('A', 'C', 'E'),
        ('s2', 'x1'): ('B', 'D', 'E'),
        ('x1', 'x2'): ('E', 'G'),
        ('s1', 'x2'): ('A', 'C', 'G'),
        ('x2', 't'): ('G', 'H', 'F'),
    }
    return ResourceGraph(capacities, links), dag, vertex_map, edge_map


@pytest.fixture(scope='session')
def desk_set():
    return desk_instances(60)


@pytest.fixture
def samples_dir():
    return SAMPLES


@pytest.fixture
def small_params():
    return GenParams(n=8, p=3, req_scale=0.5, seed=42)
