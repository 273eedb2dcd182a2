import json
import logging

import pytest

from bench import COLUMNS
from cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, __version__, configure_logging, main
from conftest import k3_graph, k3_path
from model import dump_instance, load_instance


def write_json(path, document):
    path.write_text(json.dumps(document))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_sample(capsys, samples_dir):
    code, out, _ = run(capsys, 'solve', str(samples_dir / 'k3.json'))
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['feasible']
    assert document['mapping']['cost'] == 2.0
    assert 'stats' in document


def test_solve_all_lists_every_mapping(capsys, samples_dir):
    code, out, _ = run(capsys, 'solve', str(samples_dir / 'k3.json'), '--all', '--policy', 'keepall')
    assert code == EXIT_OK
    assert len(json.loads(out)['all_at_sink']) == 3


def test_solve_infeasible_exits_one(capsys, tmp_path):
    instance = write_json(tmp_path / 'blocked.json', dump_instance(k3_graph(cross_bandwidth=2.0), k3_path()))
    code, out, _ = run(capsys, 'solve', instance)
    assert code == EXIT_INFEASIBLE
    assert json.loads(out)['feasible'] is False


def test_malformed_field_exits_two(capsys, tmp_path):
    document = dump_instance(k3_graph(), k3_path())
    document['graph']['edges'][0]['latency'] = 'slow'
    code, _, err = run(capsys, 'solve', write_json(tmp_path / 'bad.json', document))
    assert code == EXIT_USAGE
    assert 'graph.edges[0].latency' in err


def test_invalid_json_exits_two(capsys, tmp_path):
    target = tmp_path / 'broken.json'
    target.write_text('{"graph": ')
    code, _, err = run(capsys, 'solve', str(target))
    assert code == EXIT_USAGE
    assert 'invalid JSON' in err


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, _ = run(capsys, 'solve', str(tmp_path / 'absent.json'))
    assert code == EXIT_USAGE


def test_simulate_writes_trace(capsys, samples_dir, tmp_path):
    trace = tmp_path / 'trace.jsonl'
    code, out, _ = run(capsys, 'simulate', str(samples_dir / 'k3.json'), '--trace', str(trace))
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['mapping']['cost'] == 2.0
    lines = trace.read_text().splitlines()
    assert len(lines) == document['stats']['messages_sent']


def test_oracle_counts_mappings(capsys, samples_dir):
    code, out, _ = run(capsys, 'oracle', str(samples_dir / 'k3.json'))
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['count'] == 3
    assert document['optimal']['cost'] == 2.0


def test_verify_sample_mapping(capsys, samples_dir):
    code, out, _ = run(capsys, 'verify', str(samples_dir / 'k3.json'), str(samples_dir / 'k3-map.json'))
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['feasible']
    assert document['cost'] == 2.0


def test_verify_vertex_only_mapping(capsys, samples_dir, tmp_path):
    mapping = write_json(tmp_path / 'vertices.json', {'vertex_map': ['A', 'A', 'C']})
    code, out, _ = run(capsys, 'verify', str(samples_dir / 'k3.json'), mapping)
    assert code == EXIT_OK
    assert json.loads(out)['mapping']['edge_map'] == [['A'], ['A', 'B', 'C']]


def test_verify_reports_violations(capsys, samples_dir, tmp_path):
    mapping = write_json(tmp_path / 'thin.json', {'vertex_map': ['A', 'A', 'C'], 'edge_map': [['A'], ['A', 'C']]})
    code, out, _ = run(capsys, 'verify', str(samples_dir / 'k3.json'), mapping)
    assert code == EXIT_INFEASIBLE
    assert json.loads(out)['violations'][0]['kind'] == 'bandwidth'


def test_verify_solver_output(capsys, samples_dir, tmp_path):
    code, out, _ = run(capsys, 'solve', str(samples_dir / 'k3.json'))
    result = tmp_path / 'result.json'
    result.write_text(out)
    code, _, _ = run(capsys, 'verify', str(samples_dir / 'k3.json'), str(result))
    assert code == EXIT_OK


def test_gen_requires_seed(capsys):
    code, _, err = run(capsys, 'gen', '--n', '5')
    assert code == EXIT_USAGE
    assert '--seed' in err


def test_gen_output_is_loadable(capsys):
    code, out, _ = run(capsys, 'gen', '--seed', '3', '--n', '6', '--p', '3', '--emit-params')
    assert code == EXIT_OK
    document = json.loads(out)
    graph, path = load_instance(document)
    assert len(graph) == 6 and path.p == 3
    assert document['params']['seed'] == 3


def test_flags_override_config_file(capsys, tmp_path):
    config = write_json(tmp_path / 'config.json', {'n': 5, 'p': 3})
    code, out, _ = run(capsys, '--config', config, 'gen', '--seed', '1', '--p', '4')
    assert code == EXIT_OK
    graph, path = load_instance(json.loads(out))
    assert len(graph) == 5
    assert path.p == 4


def test_unknown_config_key(capsys, tmp_path):
    config = write_json(tmp_path / 'config.json', {'colour': 'blue'})
    code, _, err = run(capsys, '--config', config, 'gen', '--seed', '1')
    assert code == EXIT_USAGE
    assert 'colour' in err


def test_bench_writes_rows_and_summary(capsys, tmp_path):
    rows, summary = tmp_path / 'rows.csv', tmp_path / 'summary.csv'
    code, _, _ = run(capsys, 'bench', '--seed', '0', '--count', '2', '--out', str(rows), '--summary', str(summary))
    assert code == EXIT_OK
    lines = rows.read_text().splitlines()
    assert lines[0] == ','.join(COLUMNS)
    assert len(lines) == 1 + 2 * 3
    assert summary.read_text().startswith('metric,')


def test_bench_requires_seed(capsys):
    code, _, _ = run(capsys, 'bench', '--count', '2')
    assert code == EXIT_USAGE


def test_version(capsys):
    code, out, _ = run(capsys, '--version')
    assert code == EXIT_OK
    assert __version__ in out


@pytest.mark.parametrize('value, level', [('debug', logging.DEBUG), ('INFO', logging.INFO), ('loud', logging.WARNING)])
def test_log_level_from_environment(value, level):
    assert configure_logging({'FLOWMAP_LOG': value}) == level


def test_repeated_runs_give_identical_output(capsys, samples_dir):
    _, first, _ = run(capsys, 'gen', '--seed', '9', '--n', '7', '--p', '4')
    _, second, _ = run(capsys, 'gen', '--seed', '9', '--n', '7', '--p', '4')
    assert first == second
    for command in ('solve', 'simulate'):
        outputs = []
        for _ in range(2):
            _, out, _ = run(capsys, command, str(samples_dir / 'k3.json'), '--policy', 'annealed', '--seed', '4')
            document = json.loads(out)
            document['stats'].pop('wall_ms')
            outputs.append(document)
        assert outputs[0] == outputs[1]


def test_solve_with_bound_pruning(capsys, samples_dir):
    code, out, _ = run(capsys, 'solve', str(samples_dir / 'k3.json'), '--prune-by-bound', '--all')
    assert code == EXIT_OK
    document = json.loads(out)
    assert document['mapping']['cost'] == 2.0
    assert len(document['all_at_sink']) == 3
