import itertools

import numpy as np
import pytest

import algorithms.rounding as rounding
from algorithms.decompose import PathDistribution, decompose
from algorithms.rounding import (
    RoundingConfig,
    Variant,
    make_rng,
    round_once,
    run_csrr,
    run_rounding,
    run_rr,
    run_srr,
)
from flow.core import PathAssignment, evaluate
from lp.model import FLOW_TOL, Objective, RelaxationConfig, csrr_budget, solve_relaxation

from conftest import make_instance


def test_round_once_uses_one_draw_per_commodity():
    distribution = PathDistribution(support={0: (((0,), 0.25), ((1,), 0.75))})
    rng, twin = make_rng(4), make_rng(4)
    u = twin.random()
    expected = (0,) if u < 0.25 else (1,)
    assert round_once(distribution, 0, rng) == expected
    assert rng.random() == twin.random()


def test_round_once_frequencies():
    distribution = PathDistribution(support={0: (((0,), 0.2), ((1,), 0.8))})
    rng = make_rng(0)
    picks = [round_once(distribution, 0, rng) for _ in range(20_000)]
    assert picks.count((0,)) / len(picks) == pytest.approx(0.2, abs=0.015)


def test_round_once_rejects_empty_support():
    with pytest.raises(ValueError):
        round_once(PathDistribution(support={0: ()}), 0, make_rng(0))


@pytest.mark.parametrize("variant", list(Variant))
def test_every_variant_returns_valid_paths(small_grid, variant):
    outcome = run_rounding(small_grid, RoundingConfig(variant=variant, seed=3), "highs")
    assert len(outcome.assignment.paths) == small_grid.commodity_count
    assert evaluate(small_grid, outcome.assignment) == outcome.metrics
    assert outcome.lp_solves >= 1


@pytest.mark.parametrize("variant", [Variant.RR, Variant.SRR, Variant.SRR_UNSORTED, Variant.CSRR])
def test_same_seed_same_routing(small_grid, variant):
    config = RoundingConfig(variant=variant, seed=9)
    first = run_rounding(small_grid, config, "highs")
    second = run_rounding(small_grid, config, "highs")
    assert first.assignment == second.assignment


def test_rr_solves_one_relaxation(small_grid):
    outcome = run_rr(small_grid, RoundingConfig(variant=Variant.RR), "highs")
    # objective stage plus least-flow stage
    assert outcome.lp_solves == 2
    assert outcome.actualizations == 0


def test_theta_one_resolves_after_every_split(small_grid):
    config = RoundingConfig(variant=Variant.SRR, theta=1, seed=1)
    outcome = run_srr(small_grid, config, "highs")
    # the last split commodity needs no re-solve afterwards
    assert outcome.actualizations >= len(outcome.split_fixed) - 1
    assert outcome.lp_solves == 2 * (1 + outcome.actualizations)


def test_large_theta_never_resolves(small_grid):
    config = RoundingConfig(variant=Variant.SRR, theta=10_000)
    assert run_srr(small_grid, config, "highs").actualizations == 0


def test_default_theta_is_quarter_of_nodes(small_grid):
    assert RoundingConfig().resolved_theta(small_grid) == 3


def test_unsplit_relaxation_reproduces_its_paths(diamond):
    # the relaxation routes both commodities integrally; rounding cannot change that
    outcome = run_srr(diamond, RoundingConfig(variant=Variant.SRR, seed=5))
    assert outcome.metrics.overflow_sum == 0
    assert sorted(outcome.assignment.paths) == [(0, 2), (1, 3)]


def test_order_override(diamond):
    with pytest.raises(ValueError, match="permutation"):
        run_srr(diamond, RoundingConfig(), order=[0, 0])


def test_csrr_records_delta_star_and_restricted_rows(small_grid):
    outcome = run_csrr(small_grid, RoundingConfig(variant=Variant.CSRR, theta=1, beta=1.1), "highs")
    assert 0 < outcome.delta_star <= 1 + 1e-6
    assert len(outcome.csrr_active_rows) == outcome.actualizations


def test_csrr_needs_its_variant(small_grid):
    with pytest.raises(ValueError):
        run_csrr(small_grid, RoundingConfig(variant=Variant.SRR))


@pytest.mark.parametrize("kwargs", [dict(theta=0), dict(beta=0.9)])
def test_bad_config(kwargs):
    with pytest.raises(ValueError):
        RoundingConfig(**kwargs)


def test_status_callback_errors_are_swallowed(small_grid):
    def broken(_):
        raise RuntimeError("boom")

    outcome = run_srr(small_grid, RoundingConfig(theta=1), "highs", on_status=broken)
    assert np.isfinite(outcome.metrics.overflow_sum)


@pytest.mark.parametrize("seed", range(5))
def test_srr_without_resolves_in_input_order_is_rr(small_grid, seed):
    k = small_grid.commodity_count
    sequential = run_srr(small_grid, RoundingConfig(variant=Variant.SRR, theta=k, seed=seed), "highs",
                         order=range(k))
    independent = run_rr(small_grid, RoundingConfig(variant=Variant.RR, seed=seed), "highs")
    assert sequential.actualizations == 0
    assert sequential.assignment == independent.assignment


@pytest.mark.parametrize("seed", range(4))
def test_loose_csrr_follows_congestion_srr(small_grid, seed):
    srr = run_srr(small_grid, RoundingConfig(variant=Variant.SRR, objective=Objective.CONGESTION,
                                             theta=1, seed=seed), "highs")
    csrr = run_csrr(small_grid, RoundingConfig(variant=Variant.CSRR, theta=1, beta=1e6, seed=seed), "highs")
    assert csrr.assignment == srr.assignment
    assert csrr.lp_solves == srr.lp_solves
    assert all(rows == 0 for rows in csrr.csrr_active_rows)


def test_csrr_resolves_respect_the_restricted_capacity(small_grid, monkeypatch):
    checked = []

    def recording(instance, fixed, free, config, backend):
        solution = solve_relaxation(instance, fixed, free, config, backend)
        if config.csrr is not None:
            budget = csrr_budget(instance, fixed, config.csrr)
            room = config.csrr.beta * instance.graph.capacities * config.csrr.delta_star
            assert np.all(solution.free_load <= budget + FLOW_TOL * np.maximum(1.0, room))
            checked.append(len(fixed))
        return solution

    monkeypatch.setattr(rounding, "solve_relaxation", recording)
    outcome = run_csrr(small_grid, RoundingConfig(variant=Variant.CSRR, theta=1, beta=1.1), "highs")
    assert len(checked) == outcome.actualizations
    assert checked == sorted(checked)


@pytest.mark.parametrize("seed", range(20))
def test_two_arc_overflow_is_bounded_by_the_last_split(seed):
    rng = np.random.default_rng(seed)
    demands = rng.integers(1, 10, size=6)
    total = int(demands.sum())
    first = int(rng.integers(1, total))
    instance = make_instance(2, [(0, 1, first), (0, 1, total - first)], [(0, 1, int(q)) for q in demands])
    outcome = run_srr(instance, RoundingConfig(variant=Variant.SRR, theta=1, seed=seed), "highs")
    bound = instance.commodities[outcome.split_fixed[-1]].demand if outcome.split_fixed else 0.0
    assert outcome.metrics.overflow_sum <= bound + 1e-5


def test_rr_mean_overflow_matches_enumeration():
    instance = make_instance(2, [(0, 1, 10), (0, 1, 10)], [(0, 1, 6), (0, 1, 6)])
    solution = solve_relaxation(instance, {}, [0, 1], RelaxationConfig(), "highs")
    distribution = decompose(instance, solution, [0, 1])
    expected = 0.0
    for choice in itertools.product(distribution.paths_of(0), distribution.paths_of(1)):
        weight = np.prod([w for _, w in choice])
        paths = tuple(path for path, _ in choice)
        expected += weight * evaluate(instance, PathAssignment(paths=paths)).overflow_sum
    # one of the two commodities fills an arc, the other is split 4/6 against 2/6
    assert expected == pytest.approx(4 / 3)

    runs = [run_rr(instance, RoundingConfig(variant=Variant.RR, seed=seed), "highs").metrics.overflow_sum
            for seed in range(800)]
    assert np.mean(runs) == pytest.approx(expected, abs=0.15)
