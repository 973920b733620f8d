"""
uflow - randomized rounding for unsplittable multi-commodity flow
Command line entry point: instance generation, solving, bounds and benchmarks.
"""

import argparse
import logging
import sys
import traceback
from typing import List, Optional

import numpy as np

from algorithms.coordinator import AlgorithmCoordinator, SolveRequest
from analysis.bench import load_experiment_spec, run_experiment, summarize
from analysis.report import emit_report, format_summary
from analysis.theory import BoundQuery, approximation_factor, monte_carlo_tail
from flow.core import validate_instance
from flow.errors import UflowError
from flow.instance_gen import GridSpec, RandomGraphSpec, generate_grid, generate_random_connected
from flow.instance_io import format_solution, load_instance, save_instance, save_solution
from lp.model import Objective, RelaxationConfig, build_relaxation, export_tableau, format_tableau, relaxation_summary
from utils import console
from utils.settings import Settings


def _add_backend(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["simplex", "highs"], default=None,
                        help="LP backend (default: lp_backend setting)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uflow", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug logging")
    parser.add_argument("--settings", default=None, help="settings file (default ~/.uflow_settings.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance with a zero-overflow witness")
    gen_sub = gen.add_subparsers(dest="family", required=True)
    grid = gen_sub.add_parser("grid", help="n x n grid with 10 extra nodes")
    grid.add_argument("--n", type=int, default=10)
    random_ = gen_sub.add_parser("random", help="strongly connected random graph")
    random_.add_argument("--nodes", type=int, required=True)
    random_.add_argument("--degree", type=float, default=5.0, help="average out-degree")
    random_.add_argument("--origin-probability", type=float, default=0.1)
    for p in (grid, random_):
        p.add_argument("--capacity", type=float, default=10_000)
        p.add_argument("--max-demand", type=int, default=1500)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--output", required=True)

    validate = sub.add_parser("validate", help="check instance invariants and its witness")
    validate.add_argument("-i", "--instance", required=True)

    solve = sub.add_parser("solve", help="route every commodity on one path")
    solve.add_argument("-i", "--instance", required=True)
    solve.add_argument("-o", "--output", default=None, help="solution file (default: print)")
    solve.add_argument("--algo", default="srr",
                       help="rr | rr-sorted | srr | srr-unsorted | csrr | sa | sa2")
    solve.add_argument("--theta", type=int, default=None, help="split commodities between re-solves")
    solve.add_argument("--beta", type=float, default=None)
    solve.add_argument("--objective", default="overflow", help="overflow | congestion | mixed")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--iterations", type=int, default=None, help="annealing iterations")
    solve.add_argument("--k-paths", type=int, default=None, help="annealing candidates per commodity")
    _add_backend(solve)

    bound = sub.add_parser("bound", help="approximation factor 1 + alpha")
    bound.add_argument("--arcs", type=int, required=True)
    bound.add_argument("--epsilon", type=float, required=True)
    bound.add_argument("--gamma", type=float, required=True)
    bound.add_argument("--beta", type=float, default=1.0)

    tail = sub.add_parser("tailcheck", help="empirical per-arc tail frequencies of constrained rounding")
    tail.add_argument("-i", "--instance", required=True)
    tail.add_argument("--alpha", type=float, required=True)
    tail.add_argument("--runs", type=int, default=1000)
    tail.add_argument("--seed", type=int, default=0)
    tail.add_argument("--beta", type=float, default=1.0)
    tail.add_argument("--jobs", type=int, default=None)
    _add_backend(tail)

    bench = sub.add_parser("bench", help="run a YAML experiment spec")
    bench.add_argument("--spec", required=True)
    bench.add_argument("--out", default=None, help="output directory (env UFLOW_OUT_DIR)")
    bench.add_argument("--jobs", type=int, default=None)
    bench.add_argument("--no-progress", action="store_true")

    export = sub.add_parser("export-lp", help="dump the first relaxation as a text tableau")
    export.add_argument("-i", "--instance", required=True)
    export.add_argument("-o", "--output", default=None)
    export.add_argument("--objective", default="overflow")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_gen(args, settings: Settings) -> int:
    if args.family == "grid":
        instance = generate_grid(GridSpec(n=args.n, seed=args.seed, capacity=args.capacity,
                                          max_demand=args.max_demand))
    else:
        instance = generate_random_connected(RandomGraphSpec(
            node_count=args.nodes, seed=args.seed, average_degree=args.degree,
            origin_probability=args.origin_probability, capacity=args.capacity,
            max_demand=args.max_demand))
    save_instance(instance, args.output)
    console.success(f"{args.output}: {instance.graph.node_count} nodes, {instance.graph.arc_count} arcs, "
                    f"{instance.commodity_count} commodities")
    return 0


def cmd_validate(args, settings: Settings) -> int:
    instance = load_instance(args.instance)
    diagnostics = validate_instance(instance)
    if diagnostics:
        for line in diagnostics:
            console.warn(line)
        console.error(f"{args.instance}: {len(diagnostics)} problem(s)")
        return 1
    console.success(f"{args.instance}: valid")
    return 0


def cmd_solve(args, settings: Settings) -> int:
    instance = load_instance(args.instance)
    request = SolveRequest(
        algorithm=AlgorithmCoordinator.parse_algorithm(args.algo),
        seed=args.seed,
        theta=args.theta,
        beta=float(settings.get("beta", args.beta)),
        objective=Objective.from_name(args.objective),
        iterations=args.iterations,
        k_paths=int(settings.get("k_paths", args.k_paths)),
        backend=settings.get("lp_backend", args.backend),
    )
    coordinator = AlgorithmCoordinator(request.backend)
    coordinator.on_status = console.info if args.verbose else None
    console.start(f"Solving {args.instance} with {coordinator.display_name(request.algorithm)}")
    result = coordinator.solve(instance, request)

    extra = {"algorithm": request.algorithm.value, "seed": request.seed,
             "lp_solves": result.lp_solves, "wall_time": f"{result.wall_time:.6f}"}
    extra.update(result.extra)
    if args.output:
        save_solution(result.assignment, result.metrics, args.output, extra)
        console.success(f"Solution written to {args.output}")
    else:
        sys.stdout.write(format_solution(result.assignment, result.metrics, extra))
    console.success(f"overflow {result.metrics.overflow_sum:.6g} "
                    f"(ratio {result.metrics.overflow_ratio:.6g}), congestion {result.metrics.congestion:.6g}")
    return 0


def cmd_bound(args, settings: Settings) -> int:
    factor = approximation_factor(BoundQuery(arc_count=args.arcs, epsilon=args.epsilon,
                                             gamma=args.gamma, beta=args.beta))
    print(f"B {factor.b!r}")
    print(f"alpha {factor.alpha!r}")
    print(f"factor {factor.factor!r}")
    print(f"closed_form {factor.closed_form!r}")
    return 0


def cmd_tailcheck(args, settings: Settings) -> int:
    instance = load_instance(args.instance)
    jobs = int(settings.get("jobs", args.jobs))
    report = monte_carlo_tail(instance, args.alpha, args.runs, seed=args.seed,
                              backend=settings.get("lp_backend", args.backend), beta=args.beta,
                              jobs=jobs, on_status=console.info)
    dominated = report.dominated()
    print(f"# delta_star {report.delta_star!r} runs {report.completed}/{report.runs}")
    print("arc frequency bound slack ok")
    for e in range(len(report.bound)):
        print(f"{e} {report.frequency[e]:.6g} {report.bound[e]:.6g} {report.slack()[e]:.3g} "
              f"{'yes' if dominated[e] else 'no'}")
    if report.partial:
        console.warn(f"partial results: {report.error}")
        return 1
    if not np.all(dominated):
        console.warn(f"{int((~dominated).sum())} arc(s) above bound + slack")
        return 1
    console.success("every arc within its tail bound")
    return 0


def cmd_bench(args, settings: Settings) -> int:
    spec = load_experiment_spec(args.spec)
    out_dir = settings.output_dir(args.out)
    jobs = int(settings.get("jobs", args.jobs))
    console.start(f"Experiment {spec.name} ({spec.dataset}), {len(spec.groups)} group(s)")
    table = run_experiment(spec, jobs=jobs, progress=not args.no_progress, on_status=console.info)
    written = emit_report(table, out_dir, spec.name)
    for line in format_summary(summarize(table)):
        print(line)
    for path in written.values():
        console.success(f"wrote {path}")
    failed = int((table["error"] != "").sum())
    if failed:
        console.warn(f"{failed} run(s) failed")
    return 0


def cmd_export_lp(args, settings: Settings) -> int:
    instance = load_instance(args.instance)
    config = RelaxationConfig(objective=Objective.from_name(args.objective))
    if config.objective is Objective.MIXED:
        # first stage only
        config = RelaxationConfig(objective=Objective.CONGESTION)
    relaxation = build_relaxation(instance, {}, list(range(instance.commodity_count)), config)
    if args.output:
        export_tableau(relaxation.problem, args.output)
        sizes = relaxation_summary(relaxation)
        console.success(f"{args.output}: {sizes['columns']} columns, {sizes['rows']} rows, "
                        f"{sizes['groups']} group(s)")
    else:
        sys.stdout.write(format_tableau(relaxation.problem))
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "validate": cmd_validate,
    "solve": cmd_solve,
    "bound": cmd_bound,
    "tailcheck": cmd_tailcheck,
    "bench": cmd_bench,
    "export-lp": cmd_export_lp,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    settings = Settings(args.settings)
    try:
        return COMMANDS[args.command](args, settings)
    except (UflowError, ValueError, OSError) as e:
        console.error(f"Error: {e}")
        if args.verbose > 1:
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
