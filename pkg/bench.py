import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from dist import SimConfig, run_simulation
from exact import SolverConfig, bounded_optimal, pathmap
from gen import GenParams, generate_instance
from model import CompleteMapping, DataflowPath, ResourceGraph
from oracle import DEFAULT_MAX_NODES, brute_force_optimal
from policy import AllNeighbors, Annealed, KeepAll, LeastCost, RandomNeighbors
from verify import mapping_cost, verify_path_mapping

logger = logging.getLogger(__name__)

ARMS = (
    'exact-keepall', 'exact-bounded', 'exact-leastcost', 'exact-annealed', 'exact-randomk',
    'dist-keepall', 'dist-leastcost', 'dist-annealed', 'dist-randomk',
    'oracle',
)

COLUMNS = [
    'seed', 'n', 'p', 'arm', 'status', 'feasible', 'cost', 'optimal_cost', 'is_optimal',
    'max_slot_size', 'total_maps', 'messages_sent', 'extension_attempts', 'wall_ms',
]

INT_COLUMNS = ['seed', 'n', 'p', 'max_slot_size', 'total_maps', 'messages_sent', 'extension_attempts']
BOOL_COLUMNS = ['feasible', 'is_optimal']
FLOAT_COLUMNS = ['cost', 'optimal_cost', 'wall_ms']

# arms whose mapping is exactly optimal, in order of preference as the reference
REFERENCE_ARMS = ('oracle', 'exact-bounded', 'exact-keepall')

SUMMARY_COLUMNS =['metric', 'arm', 'n', 'count', 'value', 'q10', 'median', 'q90']

# keep-all arm each heuristic arm is compared against, with the compared counter
RATIO_BASELINES = {
    'exact-leastcost': ('exact-keepall', 'total_maps', 'map_ratio'),
    'exact-annealed': ('exact-keepall', 'total_maps', 'map_ratio'),
    'exact-randomk': ('exact-keepall', 'total_maps', 'map_ratio'),
    'dist-leastcost': ('dist-keepall', 'messages_sent', 'message_ratio'),
    'dist-annealed': ('dist-keepall', 'messages_sent', 'message_ratio'),
    'dist-randomk': ('dist-keepall', 'messages_sent', 'message_ratio'),
}


@dataclass(frozen=True)
class BenchConfig:
    seeds: Sequence[int] = ()
    n_range: Tuple[int, int] = (4, 9)
    p_range: Tuple[int, int] = (3, 6)
    base: GenParams = field(default_factory=GenParams)
    arms: Tuple[str, ...] = ('exact-keepall', 'exact-leastcost', 'oracle')
    oracle_max_nodes: int = DEFAULT_MAX_NODES
    mode: str = 'optimal'
    k: int = 2
    t0: Optional[float] = None
    alpha: float = 0.9
    max_slot: int = 4
    max_messages: Optional[int] = None
    workers: int = 1
    progress: bool = False

    def __post_init__(self):
        unknown = [arm for arm in self.arms if arm not in ARMS]
        if unknown:
            raise ValueError(f"unknown bench arms {unknown}; choose from {list(ARMS)}")
        for name, (lo, hi), floor in (('n_range', self.n_range, 2), ('p_range', self.p_range, 2)):
            if lo < floor or lo > hi:
                raise ValueError(f"{name} must satisfy {floor} <= lo <= hi, got {(lo, hi)}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        # validate policy parameters up front
        Annealed(self.t0, self.alpha, self.max_slot)
        RandomNeighbors(self.k)


def instance_params(config: BenchConfig, seed: int) -> GenParams:
    """Per-seed size draw from its own stream, then the base parameters"""
    rng = np.random.default_rng([seed, 7])
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    p = int(rng.integers(config.p_range[0], config.p_range[1] + 1))
    return replace(config.base, n=n, p=p, seed=seed)


class BenchRunner:
    """Runs every configured arm on every seeded instance and collects one row per pair"""

    def __init__(self, config: BenchConfig):
        self.config = config

    def _policies(self, arm: str):
        config = self.config
        policy_name = arm.split('-', 1)[1]
        if policy_name == 'keepall':
            return KeepAll(), AllNeighbors()
        if policy_name == 'leastcost':
            return LeastCost(), AllNeighbors()
        if policy_name == 'annealed':
            return Annealed(config.t0, config.alpha, config.max_slot), AllNeighbors()
        return LeastCost(), RandomNeighbors(config.k)

    def _run_arm(self, arm: str, graph: ResourceGraph, path: DataflowPath, seed: int) -> dict:
        config = self.config
        outcome = {'status': 'ok'}

        if arm == 'oracle':
            if len(graph) > config.oracle_max_nodes:
                return {'status': 'skipped'}
            started = time.perf_counter()
            mapping = brute_force_optimal(graph, path, config.oracle_max_nodes)
            outcome.update(mapping=mapping, wall_ms=(time.perf_counter() - started) * 1000.0)
            return outcome

        if arm == 'exact-bounded':
            result = bounded_optimal(graph, path, seed=seed)
        elif arm.startswith('exact-'):
            admission, neighbors = self._policies(arm)
            result = pathmap(graph, path, SolverConfig(mode=config.mode, admission=admission,
                                                      neighbors=neighbors, seed=seed))
        else:
            admission, neighbors = self._policies(arm)
            result = run_simulation(graph, path, SimConfig(mode=config.mode, admission=admission,
                                                           neighbors=neighbors, seed=seed,
                                                           max_messages=config.max_messages))
            if result.truncated:
                outcome['status'] = 'truncated'

        stats = result.stats
        outcome.update(
            mapping=result.best,
            max_slot_size=stats.max_slot_size,
            total_maps=stats.total_map_count,
            messages_sent=stats.messages_sent,
            extension_attempts=stats.extension_attempts,
            wall_ms=stats.wall_ms,
        )
        return outcome

    @staticmethod
    def _reverify(graph, path, mapping: CompleteMapping) -> bool:
        if not verify_path_mapping(graph, path, mapping).feasible:
            return False
        return math.isclose(mapping_cost(graph, mapping), mapping.cost, rel_tol=1e-9, abs_tol=1e-9)

    def run_seed(self, seed: int) -> List[dict]:
        params = instance_params(self.config, seed)
        graph, path = generate_instance(params)

        outcomes = {arm: self._run_arm(arm, graph, path, seed) for arm in self.config.arms}

        reference = None
        for arm in REFERENCE_ARMS:
            if arm in outcomes and outcomes[arm]['status'] == 'ok':
                reference = outcomes[arm]
                break
        optimal_cost = None
        if reference is not None and reference.get('mapping') is not None:
            optimal_cost = reference['mapping'].cost

        rows = []
        for arm in self.config.arms:
            outcome = outcomes[arm]
            row = {'seed': seed, 'n': params.n, 'p': params.p, 'arm': arm, 'status': outcome['status']}
            for name in ('max_slot_size', 'total_maps', 'messages_sent', 'extension_attempts', 'wall_ms'):
                row[name] = outcome.get(name)
            if outcome['status'] == 'skipped':
                rows.append(row)
                continue

            mapping = outcome.get('mapping')
            row['feasible'] = mapping is not None
            row['cost'] = mapping.cost if mapping is not None else None
            if mapping is not None and not self._reverify(graph, path, mapping):
                logger.error("seed %d arm %s produced a mapping that fails verification", seed, arm)
                row['status'] = 'invalid'

            if reference is not None:
                row['optimal_cost'] = optimal_cost
                if mapping is None or optimal_cost is None:
                    row['is_optimal'] = mapping is None and optimal_cost is None
                else:
                    row['is_optimal'] = math.isclose(mapping.cost, optimal_cost, rel_tol=1e-9, abs_tol=1e-9)
            rows.append(row)
        return rows

    def run(self) -> pd.DataFrame:
        config = self.config
        seeds = list(config.seeds)
        logger.info("bench: %d seeds, arms %s", len(seeds), list(config.arms))
        by_seed: Dict[int, List[dict]] = {}

        with tqdm(total=len(seeds), desc='bench', unit='instance', disable=not config.progress) as progress:
            if config.workers == 1:
                for seed in seeds:
                    by_seed[seed] = self.run_seed(seed)
                    progress.update(1)
            else:
                with ThreadPoolExecutor(max_workers=config.workers) as executor:
                    futures = {executor.submit(self.run_seed, seed): seed for seed in seeds}
                    for future in as_completed(futures):
                        by_seed[futures[future]] = future.result()
                        progress.update(1)

        rows = [row for seed in seeds for row in by_seed[seed]]
        return rows_frame(rows)


def rows_frame(rows: List[dict]) -> pd.DataFrame:
    """Bench rows in the fixed column order with nullable dtypes"""
    frame = pd.DataFrame(rows, columns=COLUMNS)
    for column in INT_COLUMNS:
        frame[column] = frame[column].astype('Int64')
    for column in BOOL_COLUMNS:
        frame[column] = frame[column].astype('boolean')
    for column in FLOAT_COLUMNS:
        frame[column] = frame[column].astype('float64')
    frame['arm'] = frame['arm'].astype('object')
    frame['status'] = frame['status'].astype('object')
    return frame


def _distribution(metric: str, arm: str, n, ratios: Sequence[float]) -> dict:
    values = np.asarray(ratios, dtype=float)
    if len(values) == 0:
        return {'metric': metric, 'arm': arm, 'n': n, 'count': 0,
                'value': np.nan, 'q10': np.nan, 'median': np.nan, 'q90': np.nan}
    return {
        'metric': metric,
        'arm': arm,
        'n': n,
        'count': len(values),
        'value': float(np.exp(np.mean(np.log(values)))),
        'q10': float(np.quantile(values, 0.1)),
        'median': float(np.median(values)),
        'q90': float(np.quantile(values, 0.9)),
    }


def _ratios(rows: pd.DataFrame, arm: str, baseline: str, counter: str) -> pd.DataFrame:
    ok = rows[rows['status'] == 'ok']
    left = ok[ok['arm'] == baseline][['seed', 'n', counter]]
    right = ok[ok['arm'] == arm][['seed', counter]]
    paired = left.merge(right, on='seed', suffixes=('_baseline', '_arm'))
    paired = paired[(paired[f"{counter}_baseline"] > 0) & (paired[f"{counter}_arm"] > 0)]
    paired = paired.assign(ratio=paired[f"{counter}_baseline"].astype(float) / paired[f"{counter}_arm"].astype(float))
    return paired[['seed', 'n', 'ratio']]


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Optimality rate per arm plus keep-all/heuristic ratio distributions, overall and per n"""
    records = []
    arms = [arm for arm in ARMS if arm in set(rows['arm'])]

    for arm in arms:
        scored = rows[(rows['arm'] == arm) & (rows['status'] == 'ok') & rows['is_optimal'].notna()]
        rate = float(scored['is_optimal'].astype(bool).mean()) if len(scored) else np.nan
        records.append({'metric': 'optimality_rate', 'arm': arm, 'n': pd.NA, 'count': len(scored),
                        'value': rate, 'q10': np.nan, 'median': np.nan, 'q90': np.nan})

    for arm in arms:
        if arm not in RATIO_BASELINES:
            continue
        baseline, counter, metric = RATIO_BASELINES[arm]
        if baseline not in arms:
            continue
        paired = _ratios(rows, arm, baseline, counter)
        records.append(_distribution(metric, arm, pd.NA, paired['ratio']))
        for n, group in paired.groupby('n', sort=True):
            records.append(_distribution(metric, arm, int(n), group['ratio']))

    summary = pd.DataFrame(records, columns=SUMMARY_COLUMNS)
    summary['n'] = summary['n'].astype('Int64')
    summary['count'] = summary['count'].astype('Int64')
    return summary


def run_bench(config: BenchConfig) -> Tuple[pd.DataFrame, pd.DataFrame]:
    rows = BenchRunner(config).run()
    return rows, summarize(rows)
