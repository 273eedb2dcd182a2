"""Command-line front end: gen, solve, simulate, oracle, verify and bench"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

from bench import ARMS, BenchConfig, BenchRunner, summarize
from dist import SimConfig, run_simulation
from errors import FlowmapError, InstanceFormatError
from exact import SolverConfig, pathmap
from export import ReportExporter
from gen import GenParams, generate_instance
from model import CompleteMapping, DataflowDag, ResourceGraph, dump_instance, load_instance, validate_instance
from oracle import DEFAULT_MAX_NODES, enumerate_feasible
from policy import make_admission_policy, make_neighbor_policy
from verify import mapping_cost, verify_dag_mapping, verify_path_mapping, verify_vertex_mapping

__version__ = '0.1.0'

logger = logging.getLogger('flowmap')

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def configure_logging(environ=None):
    """Root log level from FLOWMAP_LOG; diagnostics go to stderr only"""
    environ = os.environ if environ is None else environ
    name = environ.get('FLOWMAP_LOG', 'WARNING').upper()
    level = getattr(logging, name) if name in LOG_LEVELS else logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        force=True,
    )
    return level


def _read_json(source, label):
    if source == '-':
        text = sys.stdin.read()
    else:
        with open(source, encoding='utf-8') as handle:
            text = handle.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(label, f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _write_json(document, out):
    text = json.dumps(document, indent=2) + '\n'
    if out in (None, '-'):
        sys.stdout.write(text)
    else:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(text)


def _load_valid_instance(source):
    return _validated(_read_json(source, 'instance'))


def _validated(document):
    graph, path = load_instance(document)
    report = validate_instance(graph, path)
    if not report.feasible:
        first = report.violations[0]
        raise InstanceFormatError('instance', f"{first.kind} violation: {first.location}")
    return graph, path


def _add_policy_arguments(parser):
    group = parser.add_argument_group('policies')
    group.add_argument('--policy', choices=('keepall', 'leastcost', 'annealed'), default='keepall')
    group.add_argument('--t0', type=float, default=None, help='initial annealing temperature')
    group.add_argument('--alpha', type=float, default=0.9, help='annealing cooling factor')
    group.add_argument('--max-slot', type=int, default=4, help='annealing slot size limit')
    group.add_argument('--neighbors', choices=('all', 'randomk'), default='all')
    group.add_argument('--k', type=int, default=2, help='neighbors sampled by randomk')
    group.add_argument('--seed', type=int, default=None)
    group.add_argument('--mode', choices=('optimal', 'first_feasible'), default='optimal')


def _add_gen_arguments(parser):
    group = parser.add_argument_group('generator')
    defaults = GenParams()
    group.add_argument('--waxman-alpha', type=float, default=defaults.waxman_alpha)
    group.add_argument('--waxman-beta', type=float, default=defaults.waxman_beta)
    group.add_argument('--capacity-range', type=float, nargs=2, metavar=('LO', 'HI'), default=defaults.capacity_range)
    group.add_argument('--bandwidth-range', type=float, nargs=2, metavar=('LO', 'HI'), default=defaults.bandwidth_range)
    group.add_argument('--latency-range', type=float, nargs=2, metavar=('LO', 'HI'), default=defaults.latency_range)
    group.add_argument('--req-scale', type=float, default=defaults.req_scale)


def _gen_params(args, n, p):
    return GenParams(
        n=n,
        p=p,
        waxman_alpha=args.waxman_alpha,
        waxman_beta=args.waxman_beta,
        capacity_range=tuple(args.capacity_range),
        bandwidth_range=tuple(args.bandwidth_range),
        latency_range=tuple(args.latency_range),
        req_scale=args.req_scale,
        seed=args.seed,
    )


def _policies(args):
    admission = make_admission_policy(args.policy, args.t0, args.alpha, args.max_slot)
    neighbors = make_neighbor_policy(args.neighbors, args.k)
    return admission, neighbors


def cmd_gen(args):
    params = _gen_params(args, args.n, args.p)
    graph, path = generate_instance(params)
    document = dump_instance(graph, path)
    if args.emit_params:
        document['params'] = params.to_dict()
    _write_json(document, args.out)
    return EXIT_OK


def cmd_solve(args):
    graph, path = _load_valid_instance(args.instance)
    admission, neighbors = _policies(args)
    config = SolverConfig(
        mode=args.mode,
        admission=admission,
        neighbors=neighbors,
        retain_old=not args.low_memory,
        max_iterations=args.max_iterations,
        seed=args.seed or 0,
        debug_checks=args.debug_checks,
        prune_by_bound=args.prune_by_bound,
    )
    result = pathmap(graph, path, config)
    _write_json(result.to_dict(include_all=args.all), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_simulate(args):
    graph, path = _load_valid_instance(args.instance)
    admission, neighbors = _policies(args)
    config = SimConfig(
        mode=args.mode,
        admission=admission,
        neighbors=neighbors,
        seed=args.seed or 0,
        max_simulated_time=args.max_time,
        max_messages=args.max_messages,
        record_trace=args.trace is not None,
        debug_checks=args.debug_checks,
    )
    result = run_simulation(graph, path, config)
    if args.trace is not None:
        ReportExporter().write_trace_jsonl(result.trace, args.trace)
    _write_json(result.to_dict(include_all=args.all), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_oracle(args):
    graph, path = _load_valid_instance(args.instance)
    mappings = enumerate_feasible(graph, path, args.max_nodes, args.force)
    document = {
        'feasible': bool(mappings),
        'count': len(mappings),
        'optimal': mappings[0].to_dict() if mappings else None,
        'mappings': [mapping.to_dict() for mapping in mappings],
    }
    _write_json(document, args.out)
    return EXIT_OK


def _verify_dag(instance, document):
    graph = ResourceGraph.from_dict(instance.get('graph'), 'graph')
    dag = DataflowDag.from_dict(instance.get('dag'), 'dag')
    vertex_map = document.get('vertex_map')
    if not isinstance(vertex_map, dict):
        raise InstanceFormatError('mapping.vertex_map', "expected an object of DAG node to resource node")
    edge_map = {}
    for index, entry in enumerate(document.get('edge_map', [])):
        location = f"mapping.edge_map[{index}]"
        if not isinstance(entry, dict) or not {'u', 'v', 'route'} <= set(entry):
            raise InstanceFormatError(location, "expected {u, v, route}")
        edge_map[(str(entry['u']), str(entry['v']))] = [str(node) for node in entry['route']]
    vertex_map = {str(job): str(node) for job, node in vertex_map.items()}
    return verify_dag_mapping(graph, dag, vertex_map, edge_map).to_dict()


def cmd_verify(args):
    instance = _read_json(args.instance, 'instance')
    document = _read_json(args.mapping, 'mapping')
    if isinstance(document, dict) and 'mapping' in document:
        document = document['mapping']
    if not isinstance(document, dict):
        raise InstanceFormatError('mapping', "expected a mapping object")

    if isinstance(instance, dict) and 'dag' in instance:
        output = _verify_dag(instance, document)
        _write_json(output, args.out)
        return EXIT_OK if output['feasible'] else EXIT_INFEASIBLE

    graph, path = _validated(instance)
    if 'edge_map' in document:
        mapping = CompleteMapping.from_dict(document, 'mapping')
        report = verify_path_mapping(graph, path, mapping)
        output = report.to_dict()
        if report.feasible:
            output['cost'] = mapping_cost(graph, mapping)
    else:
        vertex_map = document.get('vertex_map')
        if not isinstance(vertex_map, list):
            raise InstanceFormatError('mapping.vertex_map', "missing field")
        report, synthesized = verify_vertex_mapping(graph, path, vertex_map)
        output = report.to_dict()
        if synthesized is not None:
            output['mapping'] = synthesized.to_dict()
            output['cost'] = synthesized.cost

    _write_json(output, args.out)
    return EXIT_OK if output['feasible'] else EXIT_INFEASIBLE


def cmd_bench(args):
    config = BenchConfig(
        seeds=range(args.seed, args.seed + args.count),
        n_range=tuple(args.n_range),
        p_range=tuple(args.p_range),
        base=_gen_params(args, max(args.n_range[0], 2), max(args.p_range[0], 2)),
        arms=tuple(args.arms),
        oracle_max_nodes=args.oracle_max_nodes,
        mode=args.mode,
        k=args.k,
        t0=args.t0,
        alpha=args.alpha,
        max_slot=args.max_slot,
        max_messages=args.max_messages,
        workers=args.workers,
        progress=args.progress,
    )
    rows = BenchRunner(config).run()
    summary = summarize(rows)

    exporter = ReportExporter()
    exporter.write_rows_csv(rows, sys.stdout if args.out in (None, '-') else args.out)
    if args.summary:
        exporter.write_summary_csv(summary, sys.stdout if args.summary == '-' else args.summary)
    if args.xlsx:
        settings = {key: value for key, value in vars(args).items() if key not in ('handler', 'config')}
        settings['base'] = asdict(config.base)
        exporter.write_excel(rows, summary, args.xlsx, settings)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog='flowmap', description=__doc__)
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--config', default=None, help='JSON file of default flag values')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', help='generate a seeded random instance')
    gen.add_argument('--n', type=int, default=GenParams.n)
    gen.add_argument('--p', type=int, default=GenParams.p)
    gen.add_argument('--seed', type=int, default=None)
    _add_gen_arguments(gen)
    gen.add_argument('--emit-params', action='store_true', help='echo the resolved parameters')
    gen.add_argument('--out', default=None)
    gen.set_defaults(handler=cmd_gen)

    solve = commands.add_parser('solve', help='centralized solver')
    solve.add_argument('instance', nargs='?', default='-')
    _add_policy_arguments(solve)
    solve.add_argument('--low-memory', action='store_true', help='drop partial maps once relaxed')
    solve.add_argument('--max-iterations', type=int, default=None)
    solve.add_argument('--debug-checks', action='store_true')
    solve.add_argument('--prune-by-bound', action='store_true',
                       help='drop partial maps that cannot beat the best complete mapping so far')
    solve.add_argument('--all', action='store_true', help='include every complete mapping found')
    solve.add_argument('--out', default=None)
    solve.set_defaults(handler=cmd_solve)

    simulate = commands.add_parser('simulate', help='distributed protocol simulation')
    simulate.add_argument('instance', nargs='?', default='-')
    _add_policy_arguments(simulate)
    simulate.add_argument('--trace', default=None, help='write every message as JSON lines')
    simulate.add_argument('--max-time', type=float, default=float('inf'))
    simulate.add_argument('--max-messages', type=int, default=None)
    simulate.add_argument('--debug-checks', action='store_true')
    simulate.add_argument('--all', action='store_true')
    simulate.add_argument('--out', default=None)
    simulate.set_defaults(handler=cmd_simulate)

    oracle = commands.add_parser('oracle', help='brute-force enumeration for small instances')
    oracle.add_argument('instance', nargs='?', default='-')
    oracle.add_argument('--max-nodes', type=int, default=DEFAULT_MAX_NODES)
    oracle.add_argument('--force', action='store_true')
    oracle.add_argument('--out', default=None)
    oracle.set_defaults(handler=cmd_oracle)

    verify = commands.add_parser('verify', help='check a mapping against an instance')
    verify.add_argument('instance')
    verify.add_argument('mapping', nargs='?', default='-')
    verify.add_argument('--out', default=None)
    verify.set_defaults(handler=cmd_verify)

    bench = commands.add_parser('bench', help='batch benchmark over seeded instances')
    bench.add_argument('--seed', type=int, default=None, help='first seed')
    bench.add_argument('--count', type=int, default=10, help='number of consecutive seeds')
    bench.add_argument('--n-range', type=int, nargs=2, metavar=('LO', 'HI'), default=(4, 9))
    bench.add_argument('--p-range', type=int, nargs=2, metavar=('LO', 'HI'), default=(3, 6))
    bench.add_argument('--arms', nargs='+', choices=ARMS, default=['exact-keepall', 'exact-leastcost', 'oracle'])
    bench.add_argument('--oracle-max-nodes', type=int, default=DEFAULT_MAX_NODES)
    bench.add_argument('--mode', choices=('optimal', 'first_feasible'), default='optimal')
    bench.add_argument('--k', type=int, default=2)
    bench.add_argument('--t0', type=float, default=None)
    bench.add_argument('--alpha', type=float, default=0.9)
    bench.add_argument('--max-slot', type=int, default=4)
    bench.add_argument('--max-messages', type=int, default=None)
    bench.add_argument('--workers', type=int, default=1)
    bench.add_argument('--progress', action='store_true')
    _add_gen_arguments(bench)
    bench.add_argument('--out', default=None, help='rows CSV (stdout by default)')
    bench.add_argument('--summary', default=None, help='summary CSV')
    bench.add_argument('--xlsx', default=None, help='Excel workbook with rows and summary')
    bench.set_defaults(handler=cmd_bench)

    return parser, commands.choices


def parse_args(argv=None):
    """Flags override --config values, which override defaults"""
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        document = _read_json(args.config, 'config')
        if not isinstance(document, dict):
            raise InstanceFormatError('config', "expected an object of flag values")
        subparser = subparsers[args.command]
        known = {action.dest for action in subparser._actions}
        unknown = sorted(set(document) - known)
        if unknown:
            raise InstanceFormatError('config', f"unknown settings {unknown} for {args.command}")
        subparser.set_defaults(**document)
        args = parser.parse_args(argv)

    if args.command in ('gen', 'bench') and args.seed is None:
        parser.error(f"{args.command} requires --seed")
    return args


def main(argv=None):
    configure_logging()
    try:
        args = parse_args(argv)
        logger.debug("running %s", args.command)
        return args.handler(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (FlowmapError, ValueError) as exc:
        print(f"flowmap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"flowmap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
