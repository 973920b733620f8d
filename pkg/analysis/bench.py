# analysis/bench.py
"""
Experiment harness: build instance groups from a YAML experiment spec, run
every algorithm on every instance and seed, and collect one result row per
run in a pandas DataFrame.

Instance seeds are fixed by the spec: instance ``i`` of the ``f``-th distinct
instance family gets ``base_seed + f * 10000 + i``. Groups that only vary an
algorithm parameter (theta, objective) share a family and therefore share
instances, which keeps paired comparisons paired.
"""

import functools
import glob
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from scipy import stats

from algorithms.coordinator import AlgorithmCoordinator, AlgorithmType, SolveRequest
from flow.core import Instance
from flow.instance_gen import GridSpec, RandomGraphSpec, generate_grid, generate_random_connected
from flow.instance_io import load_instance
from lp.model import Objective
from utils.console import emit_status
from utils.worker_pool import run_tasks

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

RESULT_COLUMNS = [
    "schema_version", "experiment", "group", "group_value", "instance_id", "algorithm", "seed",
    "nodes", "arcs", "commodities", "total_demand", "overflow_sum", "overflow_ratio",
    "congestion", "wall_time", "lp_solves", "error",
]

DATASETS = (
    "grid_size_sweep", "random_size_sweep", "commodity_sweep",
    "theta_sweep", "order_study", "objective_study",
)

# (arc capacity, maximum demand, published mean commodity count) on 110-node grids
COMMODITY_SCALING_PARAMETERS: Tuple[Tuple[int, int, int], ...] = (
    (1, 1, 182), (2, 1, 362), (5, 2, 685), (10, 3, 1038), (20, 4, 1615),
    (50, 7, 2462), (100, 10, 3512), (200, 14, 5048), (500, 22, 8138), (1000, 31, 11644),
)

THETA_RULES = ("1", "V/4", "V", "K")

FAMILY_STRIDE = 10000


@dataclass(frozen=True)
class InstanceParams:
    family: str = "grid"
    size: int = 10
    capacity: float = 10_000
    max_demand: int = 1500
    average_degree: float = 5.0
    origin_probability: float = 0.1
    files: Optional[str] = None

    def generate(self, seed: int) -> Instance:
        if self.family == "grid":
            return generate_grid(GridSpec(n=self.size, seed=seed, capacity=self.capacity,
                                          max_demand=self.max_demand))
        if self.family == "random":
            return generate_random_connected(RandomGraphSpec(
                node_count=self.size, seed=seed, average_degree=self.average_degree,
                origin_probability=self.origin_probability, capacity=self.capacity,
                max_demand=self.max_demand))
        raise ValueError(f"Unknown instance family: {self.family}")

    def file_list(self) -> List[str]:
        return sorted(glob.glob(self.files)) if self.files else []


@dataclass(frozen=True)
class GroupSpec:
    label: str
    value: float
    instance: InstanceParams
    theta: Optional[str] = None
    objective: Objective = Objective.OVERFLOW_SUM


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    dataset: str
    groups: Tuple[GroupSpec, ...]
    algorithms: Tuple[AlgorithmType, ...]
    instances_per_group: int = 100
    seeds: Tuple[int, ...] = (0,)
    base_seed: int = 0
    backend: Optional[str] = None
    beta: float = 1.1
    k_paths: int = 10
    sa_iterations: Optional[int] = None

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"Unknown dataset: {self.dataset} (known: {', '.join(DATASETS)})")
        if not self.algorithms:
            raise ValueError("experiment needs at least one algorithm")
        if self.instances_per_group < 1:
            raise ValueError("instances_per_group must be at least 1")
        if not self.groups:
            raise ValueError("experiment needs at least one group")
        if not self.seeds:
            raise ValueError("experiment needs at least one seed")


@dataclass
class ResultRow:
    experiment: str
    group: str
    group_value: float
    instance_id: str
    algorithm: str
    seed: int
    nodes: int = 0
    arcs: int = 0
    commodities: int = 0
    total_demand: float = float("nan")
    overflow_sum: float = float("nan")
    overflow_ratio: float = float("nan")
    congestion: float = float("nan")
    wall_time: float = float("nan")
    lp_solves: float = float("nan")
    error: str = ""
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        row = asdict(self)
        return {column: row[column] for column in RESULT_COLUMNS}


# -----------------------
# Spec parsing
# -----------------------
def resolve_theta(rule: Optional[str], instance: Instance) -> Optional[int]:
    """"1", "V/4", "V", "K" or a plain integer; None keeps the default."""
    if rule is None:
        return None
    rule = str(rule).strip().upper()
    nodes, commodities = instance.graph.node_count, instance.commodity_count
    if rule == "V/4":
        return max(1, math.ceil(nodes / 4))
    if rule == "V":
        return nodes
    if rule == "K":
        return max(1, commodities)
    try:
        value = int(rule)
    except ValueError:
        raise ValueError(f"Unknown theta rule: {rule}") from None
    if value < 1:
        raise ValueError(f"theta must be at least 1, got {value}")
    return value


def _instance_params(raw: Dict[str, Any], defaults: Dict[str, Any]) -> InstanceParams:
    merged = {**defaults, **raw}
    family = merged.get("family", "grid")
    size = merged.get("n", merged.get("node_count", merged.get("size", 10)))
    return InstanceParams(
        family=family,
        size=int(size),
        capacity=float(merged.get("capacity", 10_000)),
        max_demand=int(merged.get("max_demand", 1500)),
        average_degree=float(merged.get("average_degree", 5.0)),
        origin_probability=float(merged.get("origin_probability", 0.1)),
        files=merged.get("files"),
    )


def _build_groups(dataset: str, data: Dict[str, Any]) -> List[GroupSpec]:
    defaults = dict(data.get("instance", {}))
    if dataset == "random_size_sweep":
        defaults.setdefault("family", "random")
    explicit = data.get("groups")

    if dataset in ("grid_size_sweep", "random_size_sweep"):
        if explicit:
            raw_groups = explicit
        else:
            key = "n" if dataset == "grid_size_sweep" else "node_count"
            raw_groups = [{key: s} for s in data.get("sizes", [])]
        groups = []
        for raw in raw_groups:
            params = _instance_params(raw, defaults)
            groups.append(GroupSpec(label=str(raw.get("label", params.size)),
                                    value=float(params.size), instance=params))
        return groups

    if dataset == "commodity_sweep":
        if data.get("published_pairs"):
            pairs = [(cap, dmax) for cap, dmax, _ in COMMODITY_SCALING_PARAMETERS]
        else:
            pairs = [tuple(p) for p in data.get("pairs", [])]
        defaults.setdefault("n", 10)
        groups = []
        for cap, dmax in pairs:
            params = _instance_params({"capacity": cap, "max_demand": dmax}, defaults)
            groups.append(GroupSpec(label=f"{cap:g}/{dmax}", value=float(cap) / float(dmax),
                                    instance=params))
        return groups

    params = _instance_params({}, defaults)
    if dataset == "theta_sweep":
        rules = [str(t) for t in data.get("thetas", THETA_RULES)]
        return [GroupSpec(label=rule, value=float(i), instance=params, theta=rule)
                for i, rule in enumerate(rules)]
    if dataset == "objective_study":
        names = data.get("objectives", ["overflow", "congestion", "mixed"])
        return [GroupSpec(label=Objective.from_name(o).value, value=float(i), instance=params,
                          objective=Objective.from_name(o))
                for i, o in enumerate(names)]
    # order_study: one group, the algorithm list carries the comparison
    return [GroupSpec(label=str(params.size), value=float(params.size), instance=params)]


def parse_experiment_spec(data: Dict[str, Any]) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ValueError("experiment spec must be a mapping")
    dataset = data.get("dataset")
    if dataset not in DATASETS:
        raise ValueError(f"Unknown dataset: {dataset} (known: {', '.join(DATASETS)})")
    algorithms = data.get("algorithms") or (
        ["srr"] if dataset in ("theta_sweep", "objective_study") else [])
    seeds = data.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    return ExperimentSpec(
        name=str(data.get("name", dataset)),
        dataset=dataset,
        groups=tuple(_build_groups(dataset, data)),
        algorithms=tuple(AlgorithmCoordinator.parse_algorithm(a) for a in algorithms),
        instances_per_group=int(data.get("instances_per_group", 100)),
        seeds=tuple(int(s) for s in seeds),
        base_seed=int(data.get("base_seed", 0)),
        backend=data.get("backend"),
        beta=float(data.get("beta", 1.1)),
        k_paths=int(data.get("k_paths", 10)),
        sa_iterations=data.get("sa_iterations"),
    )


def load_experiment_spec(path: Union[str, FsPath]) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as f:
        return parse_experiment_spec(yaml.safe_load(f))


# -----------------------
# Running
# -----------------------
@dataclass(frozen=True)
class RunTask:
    experiment: str
    group_index: int
    group: GroupSpec
    instance_id: str
    instance_seed: Optional[int]
    instance_file: Optional[str]
    algorithm: AlgorithmType
    seed: int
    backend: Optional[str]
    beta: float
    k_paths: int
    sa_iterations: Optional[int]
    order: Tuple[int, int, int, int] = field(default=(0, 0, 0, 0))


@functools.lru_cache(maxsize=8)
def _cached_instance(params: InstanceParams, seed: Optional[int], path: Optional[str]) -> Instance:
    if path is not None:
        return load_instance(path)
    return params.generate(seed)


def plan_runs(spec: ExperimentSpec) -> List[RunTask]:
    families: Dict[InstanceParams, int] = {}
    tasks: List[RunTask] = []
    for g, group in enumerate(spec.groups):
        family = families.setdefault(group.instance, len(families))
        files = group.instance.file_list()
        count = len(files) if files else spec.instances_per_group
        for i in range(count):
            if files:
                instance_id, seed, path = FsPath(files[i]).stem, None, files[i]
            else:
                seed = spec.base_seed + family * FAMILY_STRIDE + i
                instance_id, path = f"{group.instance.family}-{group.instance.size}-s{seed}", None
            for a, algorithm in enumerate(spec.algorithms):
                for s, run_seed in enumerate(spec.seeds):
                    tasks.append(RunTask(
                        experiment=spec.name, group_index=g, group=group,
                        instance_id=instance_id, instance_seed=seed, instance_file=path,
                        algorithm=algorithm, seed=run_seed, backend=spec.backend,
                        beta=spec.beta, k_paths=spec.k_paths, sa_iterations=spec.sa_iterations,
                        order=(g, i, a, s),
                    ))
    return tasks


def execute_run(task: RunTask) -> Dict[str, Any]:
    """One (instance, algorithm, seed) run; failures land in the error column."""
    row = ResultRow(
        experiment=task.experiment, group=task.group.label, group_value=task.group.value,
        instance_id=task.instance_id, algorithm=task.algorithm.value, seed=task.seed,
    )
    try:
        instance = _cached_instance(task.group.instance, task.instance_seed, task.instance_file)
        row.nodes = instance.graph.node_count
        row.arcs = instance.graph.arc_count
        row.commodities = instance.commodity_count
        row.total_demand = instance.total_demand
        request = SolveRequest(
            algorithm=task.algorithm, seed=task.seed,
            theta=resolve_theta(task.group.theta, instance), beta=task.beta,
            objective=task.group.objective, iterations=task.sa_iterations,
            k_paths=task.k_paths, backend=task.backend,
        )
        started = time.perf_counter()
        result = AlgorithmCoordinator(task.backend).solve(instance, request)
        row.wall_time = time.perf_counter() - started
        row.overflow_sum = result.metrics.overflow_sum
        row.overflow_ratio = result.metrics.overflow_ratio
        row.congestion = result.metrics.congestion
        row.lp_solves = result.lp_solves
    except Exception as e:
        logger.warning("run %s/%s seed %d failed: %s", task.instance_id, task.algorithm.value,
                       task.seed, e)
        row.error = f"{type(e).__name__}: {e}"
    return row.to_dict()


def run_experiment(spec: ExperimentSpec, jobs: int = 1, progress: bool = False,
                   on_status: Optional[Callable[[str], None]] = None) -> pd.DataFrame:
    tasks = plan_runs(spec)
    emit_status(on_status, f"Experiment {spec.name}: {len(tasks)} runs on {jobs} worker(s)")
    rows = run_tasks(execute_run, tasks, jobs=jobs, progress=progress, desc=spec.name)
    table = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    failed = int((table["error"] != "").sum())
    if failed:
        emit_status(on_status, f"{failed} run(s) failed, see the error column")
    return table


# -----------------------
# Aggregation
# -----------------------
SUMMARY_METRICS = ("overflow_ratio", "overflow_sum", "congestion", "wall_time", "lp_solves")


def confidence_halfwidth(values: pd.Series) -> float:
    """1.96 * s / sqrt(n); NaN when fewer than two samples."""
    values = values.dropna()
    if len(values) < 2:
        return float("nan")
    return float(1.96 * values.std(ddof=1) / math.sqrt(len(values)))


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Group means and 95% half-widths per (experiment, group, algorithm)."""
    keys = ["experiment", "group", "group_value", "algorithm"]
    clean = table.copy()
    clean[list(SUMMARY_METRICS)] = clean[list(SUMMARY_METRICS)].astype(float)
    clean.loc[clean["error"] != "", list(SUMMARY_METRICS)] = np.nan
    grouped = clean.groupby(keys, sort=False)
    out = grouped.size().rename("runs").to_frame()
    for metric in SUMMARY_METRICS:
        out[f"{metric}_mean"] = grouped[metric].mean()
        out[f"{metric}_ci"] = grouped[metric].agg(confidence_halfwidth)
    out = out.reset_index()
    return out.sort_values(["experiment", "group_value", "group", "algorithm"], kind="stable",
                           ignore_index=True)


@dataclass(frozen=True)
class Comparison:
    first: str
    second: str
    metric: str
    pairs: int
    mean_first: float
    mean_second: float
    statistic: float
    pvalue: float


def compare_algorithms(table: pd.DataFrame, first: str, second: str,
                       metric: str = "overflow_ratio", alternative: str = "less",
                       group: Optional[str] = None) -> Comparison:
    """
    Paired t-test on per-instance means of ``metric``.

    ``alternative="less"`` tests whether ``first`` has the smaller mean.
    Rows may name either the algorithm or (for parameter sweeps) the group
    label; ``first``/``second`` are matched against ``algorithm`` first.
    """
    data = table[table["error"] == ""]
    if group is not None:
        data = data[data["group"] == group]
    column = "algorithm" if {first, second} <= set(data["algorithm"]) else "group"
    means = (data[data[column].isin([first, second])]
             .groupby(["instance_id", column])[metric].mean().unstack(column).dropna())
    if len(means) < 2:
        raise ValueError(f"need at least two paired instances, got {len(means)}")
    result = stats.ttest_rel(means[first], means[second], alternative=alternative)
    return Comparison(
        first=first, second=second, metric=metric, pairs=len(means),
        mean_first=float(means[first].mean()), mean_second=float(means[second].mean()),
        statistic=float(result.statistic), pvalue=float(result.pvalue),
    )


def group_means(table: pd.DataFrame, metric: str, by: Sequence[str] = ("group_value",)) -> pd.Series:
    data = table[table["error"] == ""]
    return data.groupby(list(by))[metric].mean()
