import numpy as np
import pytest

from flow.errors import CsrrInfeasibleError, RelaxationInfeasibleError
from lp.backend import get_backend
from lp.model import (
    CsrrConfig,
    Objective,
    RelaxationConfig,
    build_relaxation,
    csrr_budget,
    export_tableau,
    format_tableau,
    granularity,
    make_groups,
    relaxation_summary,
    solve_relaxation,
    usable_arcs,
)

from conftest import make_instance

BACKENDS = ["simplex", "highs"]


def all_free(instance):
    return list(range(instance.commodity_count))


@pytest.mark.parametrize("backend", BACKENDS)
def test_witness_instance_relaxes_to_zero_overflow(small_grid, backend):
    solution = solve_relaxation(small_grid, {}, all_free(small_grid), backend=backend)
    assert solution.objective_value == pytest.approx(0.0, abs=1e-6)
    assert solution.overflow_sum == pytest.approx(0.0, abs=1e-6)
    # objective stage, then the least-flow stage
    assert solution.lp_solves == 2


@pytest.mark.parametrize("backend", BACKENDS)
def test_congestion_objective(diamond, single_arc, backend):
    config = RelaxationConfig(objective=Objective.CONGESTION)
    solution = solve_relaxation(diamond, {}, all_free(diamond), config, backend)
    assert solution.objective_value == pytest.approx(1.0)
    assert solution.delta_star == pytest.approx(1.0)
    assert solve_relaxation(single_arc, {}, [0], config, backend).objective_value == pytest.approx(0.6)


def test_group_flows_conserve(two_origins):
    solution = solve_relaxation(two_origins, {}, all_free(two_origins), backend="highs")
    graph = two_origins.graph
    for group, flow in zip(solution.groups, solution.group_arc_flow):
        balance = np.zeros(graph.node_count)
        np.add.at(balance, graph.tails, flow)
        np.subtract.at(balance, graph.heads, flow)
        assert balance[group.origin] == pytest.approx(group.supply)
        for dest in set(group.destinations):
            want = sum(d for d, t in zip(group.demands, group.destinations) if t == dest)
            assert balance[dest] == pytest.approx(-want)


def test_fixed_commodities_become_constant_load(diamond):
    solution = solve_relaxation(diamond, {0: (0, 2)}, [1])
    assert solution.fixed_load.tolist() == [1.0, 0.0, 1.0, 0.0]
    assert solution.objective_value == pytest.approx(0.0, abs=1e-9)
    assert solution.total_load[1] == pytest.approx(1.0)


def test_everything_fixed_reports_fixed_overflow(diamond):
    solution = solve_relaxation(diamond, {0: (0, 2), 1: (0, 2)}, [])
    assert solution.groups == ()
    assert solution.objective_value == pytest.approx(2.0)
    config = RelaxationConfig(objective=Objective.CONGESTION)
    assert solve_relaxation(diamond, {0: (0, 2), 1: (0, 2)}, [], config).objective_value == pytest.approx(2.0)


@pytest.mark.parametrize("fixed, free, message", [
    ({}, [0, 0, 1], "duplicates"),
    ({0: (0, 2)}, [0, 1], "both fixed and free"),
    ({}, [0], "cover every commodity"),
])
def test_bad_partition(diamond, fixed, free, message):
    with pytest.raises(ValueError, match=message):
        build_relaxation(diamond, fixed, free)


def test_aggregation_does_not_change_the_optimum(two_origins):
    merged = solve_relaxation(two_origins, {}, all_free(two_origins),
                              RelaxationConfig(objective=Objective.CONGESTION), "highs")
    split = solve_relaxation(two_origins, {}, all_free(two_origins),
                             RelaxationConfig(objective=Objective.CONGESTION, aggregate=False), "highs")
    assert len(make_groups(two_origins, all_free(two_origins))) == 2
    assert len(split.groups) == 4
    assert merged.objective_value == pytest.approx(split.objective_value)


def test_usable_arcs_skip_arcs_into_origin_and_dead_ends():
    instance = make_instance(5, [(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 3, 1), (3, 1, 1), (1, 4, 1)],
                             [(0, 2, 1)])
    group = make_groups(instance, [0])[0]
    # 1->0 re-enters the origin; node 4 is a dead end
    assert usable_arcs(instance, group).tolist() == [0, 2, 3, 4]


def test_mixed_objective_keeps_congestion_optimal(small_grid):
    config = RelaxationConfig(objective=Objective.MIXED)
    solution = solve_relaxation(small_grid, {}, all_free(small_grid), config, "highs")
    assert solution.lp_solves == 3
    assert solution.delta_star is not None
    assert solution.congestion_value <= solution.delta_star + 1e-6
    assert solution.overflow_sum == pytest.approx(0.0, abs=1e-6)


def test_restricted_rows_bind(diamond):
    footprint = np.full(4, 0.5)
    config = RelaxationConfig(
        objective=Objective.CONGESTION,
        csrr=CsrrConfig(delta_star=1.0, beta=1.0, footprints={0: footprint}),
    )
    solution = solve_relaxation(diamond, {0: (0, 2)}, [1], config)
    # free flow is capped at 0.5 per arc, so half of it has to join the fixed path
    assert solution.objective_value == pytest.approx(1.5)
    assert solution.csrr_active_rows == 4
    # the unrestricted solve is tried first
    assert solution.lp_solves == 4


def test_restricted_capacity_already_exceeded(diamond):
    config = RelaxationConfig(
        objective=Objective.CONGESTION,
        csrr=CsrrConfig(delta_star=0.5, beta=1.0, footprints={0: np.array([1.0, 0.0, 1.0, 0.0])}),
    )
    with pytest.raises(CsrrInfeasibleError) as info:
        build_relaxation(diamond, {0: (0, 2)}, [1], config)
    assert info.value.arc == 0
    assert isinstance(info.value, RelaxationInfeasibleError)


def test_missing_footprint(diamond):
    config = RelaxationConfig(csrr=CsrrConfig(delta_star=1.0))
    with pytest.raises(ValueError, match="footprint"):
        build_relaxation(diamond, {0: (0, 2)}, [1], config)


@pytest.mark.parametrize("kwargs", [dict(delta_star=0.0), dict(delta_star=1.0, beta=0.5)])
def test_bad_csrr_config(kwargs):
    with pytest.raises(ValueError):
        CsrrConfig(**kwargs)


def test_objective_names():
    assert Objective.from_name("overflow-sum") is Objective.OVERFLOW_SUM
    assert Objective.from_name(" Congestion ") is Objective.CONGESTION
    assert Objective.from_name(Objective.MIXED) is Objective.MIXED
    with pytest.raises(ValueError):
        Objective.from_name("cost")


def test_granularity(single_arc):
    assert granularity(single_arc, 0.6) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        granularity(single_arc, 0.0)


def test_tableau_export(tmp_path, single_arc):
    relaxation = build_relaxation(single_arc, {}, [0])
    text = format_tableau(relaxation.problem)
    lines = text.splitlines()
    sizes = relaxation_summary(relaxation)
    assert lines[0] == f"lp vars {sizes['columns']} rows {sizes['rows']}"
    assert sum(line.startswith("var ") for line in lines) == sizes["columns"]
    assert sum(line.startswith("row ") for line in lines) == sizes["rows"]
    assert "var 0 x[o=0,e=0] 0.0 3.0 0.0" in lines
    path = tmp_path / "relaxation.lp.txt"
    export_tableau(relaxation.problem, path)
    assert path.read_text(encoding="utf-8") == text


def test_least_flow_stage_drops_detours():
    # the detour 0->2->1 costs nothing in overflow but doubles the flow
    instance = make_instance(3, [(0, 1, 10), (0, 2, 10), (2, 1, 10)], [(0, 1, 3)])
    solution = solve_relaxation(instance, {}, [0], backend="highs")
    assert solution.free_load.tolist() == pytest.approx([3.0, 0.0, 0.0], abs=1e-7)
    assert solution.objective_value == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("objective, solves", [
    (Objective.OVERFLOW_SUM, 1), (Objective.CONGESTION, 1), (Objective.MIXED, 2)])
def test_tie_break_can_be_turned_off(small_grid, objective, solves):
    config = RelaxationConfig(objective=objective, tie_break=False)
    plain = solve_relaxation(small_grid, {}, all_free(small_grid), config, "highs")
    tied = solve_relaxation(small_grid, {}, all_free(small_grid),
                            RelaxationConfig(objective=objective), "highs")
    assert plain.lp_solves == solves
    assert tied.lp_solves == solves + 1
    assert tied.objective_value == pytest.approx(plain.objective_value, abs=1e-6)
    assert tied.free_load.sum() <= plain.free_load.sum() + 1e-6


def test_objective_never_improves_as_commodities_get_fixed(small_grid):
    from algorithms.decompose import decompose

    config = RelaxationConfig(objective=Objective.CONGESTION)
    free = all_free(small_grid)
    solution = solve_relaxation(small_grid, {}, free, config, "highs")
    # fix everything to the last path of its first distribution, one by one
    distribution = decompose(small_grid, solution)
    values = [solution.objective_value]
    fixed = {}
    for k in list(free):
        fixed[k] = distribution.paths_of(k)[-1][0]
        free.remove(k)
        values.append(solve_relaxation(small_grid, fixed, free, config, "highs").objective_value)
    assert all(later >= earlier - 1e-6 for earlier, later in zip(values, values[1:]))


def test_mixed_overflow_is_no_worse_than_congestion_overflow():
    # 0->1 is forced to congestion 3, leaving 2->3 free to spread anywhere up to 3
    instance = make_instance(4, [(0, 1, 1), (2, 3, 1), (2, 3, 3)], [(0, 1, 3), (2, 3, 4)])
    free = all_free(instance)
    congestion = solve_relaxation(instance, {}, free, RelaxationConfig(objective=Objective.CONGESTION), "highs")
    mixed = solve_relaxation(instance, {}, free, RelaxationConfig(objective=Objective.MIXED), "highs")
    assert mixed.delta_star == pytest.approx(3.0)
    assert mixed.congestion_value == pytest.approx(3.0)
    assert mixed.overflow_sum == pytest.approx(2.0, abs=1e-6)
    assert mixed.overflow_sum <= congestion.overflow_sum + 1e-6


def test_parallel_pair_congestion_optimum():
    instance = make_instance(2, [(0, 1, 10), (0, 1, 10)], [(0, 1, 6), (0, 1, 6)])
    config = RelaxationConfig(objective=Objective.CONGESTION)
    assert solve_relaxation(instance, {}, [0, 1], config, "highs").delta_star == pytest.approx(0.6)


def test_loose_restriction_keeps_the_unrestricted_solution(small_grid):
    free = all_free(small_grid)
    config = RelaxationConfig(objective=Objective.CONGESTION)
    plain = solve_relaxation(small_grid, {}, free, config, "highs")
    loose = RelaxationConfig(objective=Objective.CONGESTION,
                             csrr=CsrrConfig(delta_star=plain.delta_star, beta=1e6))
    restricted = solve_relaxation(small_grid, {}, free, loose, "highs")
    assert restricted.csrr_active_rows == 0
    assert restricted.lp_solves == plain.lp_solves
    for ours, theirs in zip(restricted.group_arc_flow, plain.group_arc_flow):
        assert np.array_equal(ours, theirs)


def test_unit_beta_with_nothing_fixed_is_the_congestion_relaxation(small_grid):
    free = all_free(small_grid)
    plain = solve_relaxation(small_grid, {}, free, RelaxationConfig(objective=Objective.CONGESTION), "highs")
    csrr = CsrrConfig(delta_star=plain.delta_star, beta=1.0)
    config = RelaxationConfig(objective=Objective.CONGESTION, csrr=csrr)
    restricted = solve_relaxation(small_grid, {}, free, config, "highs")
    assert restricted.objective_value == pytest.approx(plain.objective_value, rel=1e-6)
    assert restricted.csrr_active_rows == 0
    # with every row in the model the optimum is the same
    relaxation = build_relaxation(small_grid, {}, free, config)
    assert relaxation.csrr_rows.stop > relaxation.csrr_rows.start
    direct = get_backend("highs").solve(relaxation.problem)
    assert direct.objective_value == pytest.approx(plain.objective_value, rel=1e-6)


def test_fixed_commodity_footprint_holds_the_free_flow():
    # unrestricted, the free flow would drain to the empty arc and reach congestion 0.6
    instance = make_instance(2, [(0, 1, 10), (0, 1, 10)], [(0, 1, 4), (0, 1, 4), (0, 1, 4)])
    csrr = CsrrConfig(delta_star=0.6, beta=1.0, footprints={2: np.array([0.5, 0.5])})
    config = RelaxationConfig(objective=Objective.CONGESTION, csrr=csrr)
    assert csrr_budget(instance, {2: (0,)}, csrr).tolist() == pytest.approx([4.0, 4.0])
    solution = solve_relaxation(instance, {2: (0,)}, [0, 1], config, "highs")
    assert solution.free_load.tolist() == pytest.approx([4.0, 4.0], abs=1e-6)
    assert solution.objective_value == pytest.approx(0.8)
    assert solution.csrr_active_rows >= 1


def test_restricted_resolve_infeasibility_names_an_arc():
    instance = make_instance(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)], [(0, 3, 1), (0, 3, 2)])
    csrr = CsrrConfig(delta_star=1.0, beta=1.0, footprints={0: np.full(4, 0.5)})
    config = RelaxationConfig(objective=Objective.CONGESTION, csrr=csrr)
    # two free units but only 0.5 of room on either arc out of the origin
    with pytest.raises(CsrrInfeasibleError) as info:
        solve_relaxation(instance, {0: (0, 2)}, [1], config, "highs")
    assert info.value.arc == 1
